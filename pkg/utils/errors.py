"""
Exception hierarchy for the PINC toolkit.

User errors (bad config, missing datasets, incompatible checkpoints) map to
exit code 1 in the CLI; numerical failures map to exit code 2.
"""

from typing import Any, Dict, Optional


class PincError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PincError):
    """Invalid or unknown configuration key or value."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class DatasetError(PincError):
    """Missing, malformed or mutually incompatible dataset files."""


class CheckpointError(PincError):
    """Checkpoint cannot be read or does not match the model configuration."""


class NumericalError(PincError):
    """
    Non-finite value produced by the simulator, the network, a loss or a gradient.

    Keyword context (layer, step, epoch, batch, loss_name) is kept on the
    instance and appended to the message.
    """

    def __init__(self, message: str, **context: Any):
        self.context: Dict[str, Any] = {k: v for k, v in context.items() if v is not None}
        if self.context:
            details = ", ".join(f"{k}={v}" for k, v in self.context.items())
            message = f"{message} ({details})"
        super().__init__(message)

    def get(self, key: str) -> Optional[Any]:
        return self.context.get(key)
