"""Integration tests for forest-rules."""
