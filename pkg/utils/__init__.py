"""
Shared helpers and the exception hierarchy.
"""

from .errors import PincError, ConfigError, DatasetError, CheckpointError, NumericalError

__all__ = ['PincError', 'ConfigError', 'DatasetError', 'CheckpointError', 'NumericalError']
