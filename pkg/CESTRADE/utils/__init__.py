"""Utility functions and helpers for CESTRADE"""

from .format_utils import format_number, write_csv

__all__ = ["format_number", "write_csv"]
