"""Integration tests for CESTRADE."""
