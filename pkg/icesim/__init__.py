"""Desk-scale transient ice-flow oracle used to generate training data."""
