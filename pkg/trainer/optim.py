"""
AdamW updates from flat gradient vectors and reduce-on-plateau learning-rate control.
"""

import logging
from typing import Optional, Sequence

import torch
import torch.nn as nn
from torch.optim import AdamW
from torch.optim.lr_scheduler import ReduceLROnPlateau

from autodiff.derivatives import assign_gradient

PLATEAU_THRESHOLD = 1e-4


def make_optimizer(model: nn.Module, lr: float, betas: Sequence[float] = (0.9, 0.999),
                   eps: float = 1e-8, weight_decay: float = 1e-2) -> AdamW:
    """AdamW over all model parameters (including activation slopes and layer-norm parameters)."""
    return AdamW(model.parameters(), lr=lr, betas=tuple(betas), eps=eps, weight_decay=weight_decay)


def current_lr(optimizer: torch.optim.Optimizer) -> float:
    return optimizer.param_groups[0]["lr"]


def adamw_step(optimizer: AdamW, model: nn.Module, grad: torch.Tensor, lr: Optional[float] = None) -> None:
    """
    Apply one AdamW update with a flat gradient vector.

    Weight decay is decoupled: parameters are scaled by (1 - lr * weight_decay)
    before the bias-corrected Adam step; decay does not enter the moments.

    Args:
        optimizer: Optimizer built by :func:`make_optimizer`; holds the moment state.
        model: Model whose parameters the optimizer updates.
        grad: Flat gradient in the canonical parameter ordering.
        lr: Learning rate for this step; keeps the optimizer's current value when None.
    """
    if lr is not None:
        for group in optimizer.param_groups:
            group["lr"] = lr
    assign_gradient(model, grad)
    optimizer.step()
    optimizer.zero_grad(set_to_none=True)


class PlateauScheduler:
    """
    Reduce-on-plateau control of the optimizer learning rate.

    The rate is multiplied by ``factor`` (floored at ``lr_min``) once the dev loss
    has failed to improve by a relative 1e-4 for ``patience`` consecutive
    evaluations; the counter then resets.
    """

    def __init__(self, optimizer: torch.optim.Optimizer, patience: int = 100,
                 factor: float = 0.5, lr_min: float = 1e-4):
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.optimizer = optimizer
        # torch reduces once the bad-evaluation count exceeds its patience.
        self._scheduler = ReduceLROnPlateau(
            optimizer, mode="min", factor=factor, patience=patience - 1,
            threshold=PLATEAU_THRESHOLD, threshold_mode="rel", min_lr=lr_min,
        )

    @property
    def best(self) -> float:
        return self._scheduler.best

    @property
    def num_bad_evaluations(self) -> int:
        return self._scheduler.num_bad_epochs

    def step(self, dev_loss: float) -> float:
        old_lr = current_lr(self.optimizer)
        self._scheduler.step(dev_loss)
        new_lr = current_lr(self.optimizer)
        if new_lr < old_lr:
            logging.warning(f"Dev loss plateaued; learning rate reduced {old_lr:.3e} -> {new_lr:.3e}")
        return new_lr


def lr_schedule_update(scheduler: PlateauScheduler, dev_loss: float) -> float:
    """Feed one dev-loss evaluation to the scheduler and return the resulting learning rate."""
    return scheduler.step(dev_loss)
