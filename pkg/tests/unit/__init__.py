"""Unit tests for CESTRADE."""
