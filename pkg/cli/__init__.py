"""Command-line workflow: generate, train, evaluate, benchmark."""
