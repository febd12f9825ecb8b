"""
Utilities for the manipulator pipeline.

Configuration, logging, file handling and report emission.
"""

from .common import (
    ensure_directory,
    atomic_write,
    format_value,
    parse_number_list
)

from .logger import (
    setup_logger,
    get_logger,
    get_logger_with_context,
    LoggerAdapter
)

from .report_writer import (
    save_table_csv,
    save_report,
    save_matrices,
    load_matrices
)

__all__ = [
    # Common utilities
    'ensure_directory',
    'atomic_write',
    'format_value',
    'parse_number_list',

    # Logging
    'setup_logger',
    'get_logger',
    'get_logger_with_context',
    'LoggerAdapter',

    # Reports
    'save_table_csv',
    'save_report',
    'save_matrices',
    'load_matrices'
]
