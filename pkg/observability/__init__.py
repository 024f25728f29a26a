"""Logging and stage tracing."""
