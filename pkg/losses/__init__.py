"""
PINC training losses.
"""

from .pinc_losses import (
    Batch, LossWeights, LOSS_NAMES,
    data_loss, physics_loss, ic_loss, rollout_loss, physics_rollout_loss, loss_evaluator,
)

__all__ = [
    'Batch', 'LossWeights', 'LOSS_NAMES',
    'data_loss', 'physics_loss', 'ic_loss', 'rollout_loss', 'physics_rollout_loss', 'loss_evaluator',
]
