"""
Common utilities for the manipulator pipeline.

Directory handling, atomic file writes and reproducible number formatting.
"""
import os
import tempfile
from contextlib import contextmanager
from typing import Any, Iterator, IO

import numpy as np

SIGNIFICANT_DIGITS = 9
FLOAT_FORMAT = f"%.{SIGNIFICANT_DIGITS}g"


def ensure_directory(directory: str) -> str:
    """
    Ensure a directory exists.

    Args:
        directory: Directory path

    Returns:
        Absolute path to the directory

    Raises:
        OSError: If directory creation fails
    """
    try:
        os.makedirs(directory, exist_ok=True)
        return os.path.abspath(directory)
    except OSError as e:
        raise OSError(f"Failed to create directory {directory}: {e}")


@contextmanager
def atomic_write(path: str, mode: str = "w") -> Iterator[IO[Any]]:
    """
    Write a file through a temporary sibling, renamed into place on success.

    If the body raises, the temporary file is removed and `path` is left
    untouched.

    Args:
        path: Destination path
        mode: "w" or "wb"
    """
    directory = os.path.dirname(os.path.abspath(path))
    ensure_directory(directory)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as f:
            yield f
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def format_value(value: Any) -> str:
    """
    Format a value for report output.

    Floats (including numpy scalars) use 9 significant digits; None becomes
    "none"; booleans are lower case.
    """
    if value is None:
        return "none"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def parse_number_list(text: str) -> list:
    """
    Parse a comma separated list of numbers.

    Raises:
        ValueError: If an item is not a number
    """
    items = [item.strip() for item in text.split(",") if item.strip()]
    if not items:
        raise ValueError(f"No values in {text!r}")
    try:
        return [float(item) for item in items]
    except ValueError as e:
        raise ValueError(f"Invalid number list {text!r}: {e}")
