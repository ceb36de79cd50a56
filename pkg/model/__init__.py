"""
PINC network, one-step prediction, rollout and checkpoints.
"""

from .network import (
    ModelConfig, PINCNetwork, AdaptiveActivation, HiddenLayer,
    activation, init_params, renormalize_yaw, time_column, INPUT_DIM, OUTPUT_DIM,
)
from .checkpoint import save_checkpoint, load_checkpoint, model_state

__all__ = [
    'ModelConfig', 'PINCNetwork', 'AdaptiveActivation', 'HiddenLayer',
    'activation', 'init_params', 'renormalize_yaw', 'time_column', 'INPUT_DIM', 'OUTPUT_DIM',
    'save_checkpoint', 'load_checkpoint', 'model_state',
]
