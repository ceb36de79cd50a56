"""
Database module for the experiment grid.

This module contains the run registry storing grid cells and their results.
"""

from .run_store import RunStore, GridRun, SUMMARY_COLUMNS

__all__ = ['RunStore', 'GridRun', 'SUMMARY_COLUMNS']
