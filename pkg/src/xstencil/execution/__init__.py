"""Interpreters, the multi-rank simulator, kernel presets and benchmarking."""
