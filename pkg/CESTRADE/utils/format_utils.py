"""
Format utilities for CESTRADE.

This module contains number formatting and the CSV writer used for every
study artifact.
"""

import math
import re
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import pandas as pd

from ..constants import CSV_SIGNIFICANT_DIGITS

FLOAT_FORMAT = f"%.{CSV_SIGNIFICANT_DIGITS}g"


def format_number(value: Optional[float], digits: int = CSV_SIGNIFICANT_DIGITS) -> str:
    """
    Format a number with a fixed count of significant digits.

    Args:
        value: Number to format
        digits: Significant digits

    Returns:
        Formatted number, or an empty string for None and NaN
    """
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return ""
    return f"{value:.{digits}g}"


def format_percent(value: Optional[float], decimals: int = 2) -> str:
    """
    Format a percentage for log and console lines.

    Args:
        value: Percentage (already multiplied by 100)
        decimals: Decimal places

    Returns:
        Formatted percentage such as "12.34%", or "n/a"
    """
    if value is None or math.isnan(float(value)):
        return "n/a"
    return f"{float(value):.{decimals}f}%"


def parse_number_list(text: Union[str, Sequence[float]]) -> List[float]:
    """
    Parse a comma or whitespace separated list of numbers.

    Args:
        text: Text such as "20, 40 80" or an already parsed sequence

    Returns:
        List of floats

    Raises:
        ValueError: If an item is not a number
    """
    if not isinstance(text, str):
        return [float(v) for v in text]
    items = [item for item in re.split(r"[,\s]+", text.strip()) if item]
    return [float(item) for item in items]


def write_csv(
    path: Union[str, Path],
    rows: Union[pd.DataFrame, Iterable[Dict[str, object]]],
    columns: Optional[Sequence[str]] = None,
) -> Path:
    """
    Write a table as CSV with a fixed column order.

    Floats are printed with CSV_SIGNIFICANT_DIGITS significant digits, NaN as
    an empty cell and lines end with a bare newline, so equal tables give
    byte-identical files.

    Args:
        path: Output file
        rows: DataFrame or iterable of row dicts
        columns: Column order; defaults to the order of the first row

    Returns:
        The written path
    """
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    if columns is not None:
        frame = frame.reindex(columns=list(columns))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="", lineterminator="\n")
    return path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Read an artifact written by ``write_csv``."""
    return pd.read_csv(path)
