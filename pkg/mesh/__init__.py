"""Triangular finite-element meshes, their graphs and regular-grid resampling."""
