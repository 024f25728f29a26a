"""Settings and model configuration."""
