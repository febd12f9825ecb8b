"""
Report emission for the manipulator pipeline.

Tables go to CSV through pandas, scalar reports to `key = value` text, and
matrices to YAML. Every file is written atomically.
"""
import logging
from typing import Any, Dict, Mapping

import numpy as np
import pandas as pd
import yaml

from .common import FLOAT_FORMAT, atomic_write, format_value

logger = logging.getLogger(__name__)


def save_table_csv(frame: pd.DataFrame, filepath: str) -> str:
    """
    Save a table as CSV with 9 significant digits.

    Args:
        frame: Table to save
        filepath: Destination path

    Returns:
        Path to the saved file
    """
    logger.info(f"Saving table to CSV: {filepath}")
    try:
        with atomic_write(filepath) as f:
            frame.to_csv(f, index=False, float_format=FLOAT_FORMAT)
    except Exception as e:
        logger.error(f"Error saving table to {filepath}: {e}")
        raise
    return filepath


def format_report(report: Mapping[str, Any]) -> str:
    """Render a flat mapping as `key = value` lines."""
    return "".join(f"{key} = {format_value(value)}\n" for key, value in report.items())


def save_report(report: Mapping[str, Any], filepath: str) -> str:
    """
    Save a flat report as `key = value` lines.

    Args:
        report: Scalar values keyed by name
        filepath: Destination path

    Returns:
        Path to the saved file
    """
    logger.info(f"Saving report: {filepath}")
    try:
        with atomic_write(filepath) as f:
            f.write(format_report(report))
    except Exception as e:
        logger.error(f"Error saving report to {filepath}: {e}")
        raise
    return filepath


def matrices_to_lists(matrices: Mapping[str, np.ndarray]) -> Dict[str, Any]:
    """Convert arrays to nested lists of floats rounded to 9 significant digits."""
    out: Dict[str, Any] = {}
    for name, matrix in matrices.items():
        array = np.atleast_2d(np.asarray(matrix, dtype=float))
        out[name] = [[float(FLOAT_FORMAT % value) for value in row] for row in array]
    return out


def save_matrices(matrices: Mapping[str, np.ndarray], filepath: str) -> str:
    """
    Save named matrices as YAML nested lists, readable by `verify --matrices`.

    Args:
        matrices: Matrix name -> array
        filepath: Destination path

    Returns:
        Path to the saved file
    """
    logger.info(f"Saving matrices to YAML: {filepath}")
    try:
        with atomic_write(filepath) as f:
            yaml.safe_dump(matrices_to_lists(matrices), f, default_flow_style=None, sort_keys=False)
    except Exception as e:
        logger.error(f"Error saving matrices to {filepath}: {e}")
        raise
    return filepath


def load_matrices(filepath: str) -> Dict[str, np.ndarray]:
    """
    Load named matrices written by save_matrices (or by hand).

    Raises:
        ValueError: If the file is not valid YAML or not a mapping of nested
            numeric lists
    """
    with open(filepath, "r") as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ValueError(f"{filepath}: cannot parse matrices: {e}")
    if not isinstance(data, dict):
        raise ValueError(f"{filepath}: expected a mapping of matrix name to nested lists")
    out = {}
    for name, value in data.items():
        try:
            out[name] = np.atleast_2d(np.asarray(value, dtype=float))
        except (TypeError, ValueError) as e:
            raise ValueError(f"{filepath}: matrix {name} is not numeric: {e}")
    return out
