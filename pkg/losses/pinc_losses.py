"""
PINC training losses over batches of trajectories.

Every loss is a 9-component mean squared error in the network-state
representation (yaw as its cos/sin pair). Points without a following control
(the last sample of each trajectory) only ever serve as targets.
"""

from dataclasses import dataclass, fields
from typing import Any, Callable, Dict, Optional, Sequence

import torch
import torch.nn as nn

from autodiff.derivatives import forward_with_time_derivative
from datagen.generator import Dataset
from datagen.sampling import to_net_state
from dynamics import PhysicalParams, lifted_derivative
from utils.errors import ConfigError

LOSS_NAMES = ("data", "phy", "ic", "roll", "phy_roll")


@dataclass
class Batch:
    """
    A batch of N_B trajectories with N_D points each.

    Attributes:
        states: (N_B, N_D, 9) ground-truth network states (targets).
        controls: (N_B, N_D - 1, 4) controls held over each interval.
        colloc_times: (N_B, N_D - 1, N_P) collocation times per interval.
        T: Sampling period.
        inputs: Optional (N_B, N_D, 9) network inputs (noisy copies of ``states``).
    """

    states: torch.Tensor
    controls: torch.Tensor
    colloc_times: torch.Tensor
    T: float
    inputs: Optional[torch.Tensor] = None

    def __post_init__(self):
        n_b, n_d, _ = self.states.shape
        if self.controls.shape[:2] != (n_b, n_d - 1):
            raise ValueError(f"controls shape {tuple(self.controls.shape)} does not match states {tuple(self.states.shape)}")
        if self.colloc_times.shape[:2] != (n_b, n_d - 1):
            raise ValueError(f"colloc_times shape {tuple(self.colloc_times.shape)} does not match states")
        if self.inputs is not None and self.inputs.shape != self.states.shape:
            raise ValueError("inputs must have the same shape as states")

    @property
    def initial_states(self) -> torch.Tensor:
        return self.states if self.inputs is None else self.inputs

    @property
    def n_points(self) -> int:
        return self.states.shape[1]

    @classmethod
    def from_dataset(cls, dataset: Dataset, indices: Optional[Sequence[int]] = None) -> "Batch":
        tensors = dataset.to_tensors(indices)
        return cls(
            states=to_net_state(tensors["states"]),
            controls=tensors["controls"],
            colloc_times=tensors["colloc_times"],
            T=dataset.T,
        )

    def select(self, indices: Sequence[int]) -> "Batch":
        idx = torch.as_tensor(list(indices), dtype=torch.long)
        return Batch(
            states=self.states[idx],
            controls=self.controls[idx],
            colloc_times=self.colloc_times[idx],
            T=self.T,
            inputs=None if self.inputs is None else self.inputs[idx],
        )


@dataclass(frozen=True)
class LossWeights:
    data: float = 1.0
    roll: float = 1.0
    phy: float = 0.5
    phy_roll: float = 0.5
    ic: float = 0.5
    n_pred: int = 10

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"train.weights.{f.name}", "must be >= 0")
        if self.n_pred < 1:
            raise ConfigError("train.n_pred", "must be >= 1")

    def weight(self, name: str) -> float:
        return getattr(self, name)

    @classmethod
    def from_dict(cls, weights: Dict[str, Any], n_pred: int = 10) -> "LossWeights":
        for key in weights:
            if key not in LOSS_NAMES:
                raise ConfigError(f"train.weights.{key}", "unknown loss")
        return cls(n_pred=int(n_pred), **{k: float(v) for k, v in weights.items()})


def _squared_error(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return ((pred - target) ** 2).sum(dim=-1).mean()


def _residual_loss(model: nn.Module, ns0: torch.Tensor, u0: torch.Tensor,
                   colloc_times: torch.Tensor, params: PhysicalParams) -> torch.Tensor:
    """Mean squared physics residual at the collocation times; ns0/u0 are (..., D), colloc (..., N_P)."""
    n_colloc = colloc_times.shape[-1]
    ns0 = ns0.unsqueeze(-2).expand(*ns0.shape[:-1], n_colloc, ns0.shape[-1])
    u0 = u0.unsqueeze(-2).expand(*u0.shape[:-1], n_colloc, u0.shape[-1])
    pred, rate = forward_with_time_derivative(model, ns0, u0, colloc_times)
    residual = rate - lifted_derivative(pred, u0, params)
    return (residual ** 2).sum(dim=-1).mean()


def _windows(values: torch.Tensor, n_pred: int, start: int = 0) -> torch.Tensor:
    """(N_B, L, D) -> (N_B, N_R, n_pred, D) sliding windows along dim 1."""
    windows = values[:, start:].unfold(1, n_pred, 1)
    return windows.movedim(-1, 2)


def _check_horizon(batch: Batch, n_pred: int) -> int:
    n_rollouts = batch.n_points - n_pred
    if n_pred < 1 or n_rollouts < 1:
        raise ValueError(f"rollout horizon {n_pred} needs more than {n_pred} points per trajectory, got {batch.n_points}")
    return n_rollouts


def data_loss(model: nn.Module, batch: Batch) -> torch.Tensor:
    """One-step prediction error over all N_B (N_D - 1) consecutive pairs."""
    if batch.n_points < 2:
        raise ValueError("data loss needs at least two points per trajectory")
    pred = model(batch.initial_states[:, :-1], batch.controls, batch.T)
    return _squared_error(pred, batch.states[:, 1:])


def physics_loss(model: nn.Module, batch: Batch, params: PhysicalParams) -> torch.Tensor:
    """Physics residual dx/dt - f(x, u) at every collocation time of every interval."""
    return _residual_loss(model, batch.initial_states[:, :-1], batch.controls, batch.colloc_times, params)


def ic_loss(model: nn.Module, batch: Batch) -> torch.Tensor:
    """Prediction at t = 0 against the ground-truth state of each point that carries a control."""
    pred = model(batch.initial_states[:, :-1], batch.controls, 0.0)
    return _squared_error(pred, batch.states[:, :-1])


def rollout_loss(model: nn.Module, batch: Batch, n_pred: int) -> torch.Tensor:
    """
    Multi-step error: autoregressive rollouts of n_pred steps from each of the
    first N_D - n_pred points, compared with the ground truth at every step.
    """
    n_rollouts = _check_horizon(batch, n_pred)
    starts = batch.initial_states[:, :n_rollouts]
    controls = _windows(batch.controls, n_pred)
    targets = _windows(batch.states, n_pred, start=1)
    pred = model.rollout(starts, controls, batch.T)
    return _squared_error(pred, targets)


def physics_rollout_loss(model: nn.Module, batch: Batch, n_pred: int, params: PhysicalParams) -> torch.Tensor:
    """
    Physics residual along rollouts: step k starts from the (k - 1)-th predicted
    state and uses the collocation times of its interval; averaged over all steps.
    """
    n_rollouts = _check_horizon(batch, n_pred)
    starts = batch.initial_states[:, :n_rollouts]
    controls = _windows(batch.controls, n_pred)
    colloc = _windows(batch.colloc_times, n_pred)
    pred = model.rollout(starts, controls, batch.T)
    step_inputs = torch.cat((starts.unsqueeze(2), pred[:, :, :-1]), dim=2)
    return _residual_loss(model, step_inputs, controls, colloc, params)


def loss_evaluator(name: str, model: nn.Module, batch: Batch, params: PhysicalParams,
                   n_pred: int) -> Callable[[], torch.Tensor]:
    """Zero-argument closure evaluating the named loss on a batch."""
    if name == "data":
        return lambda: data_loss(model, batch)
    if name == "phy":
        return lambda: physics_loss(model, batch, params)
    if name == "ic":
        return lambda: ic_loss(model, batch)
    if name == "roll":
        return lambda: rollout_loss(model, batch, n_pred)
    if name == "phy_roll":
        return lambda: physics_rollout_loss(model, batch, n_pred, params)
    raise ValueError(f"Unknown loss {name!r}; expected one of {LOSS_NAMES}")
