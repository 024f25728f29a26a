"""Datasets, splits, training, evaluation and timing."""
