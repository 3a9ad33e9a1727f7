"""Unit tests for forest-rules."""
