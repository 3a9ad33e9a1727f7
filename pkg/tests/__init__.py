"""Tests for forest-rules."""
