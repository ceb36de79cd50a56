"""
Evaluation metrics: one-step and rollout errors, physics residual, position
errors along full rollouts and the valid prediction time (VPT).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import torch
import torch.nn as nn

from datagen.generator import Dataset, Trajectory
from datagen.sampling import to_net_state
from dynamics import PhysicalParams
from losses.pinc_losses import Batch, data_loss, physics_loss, rollout_loss
from utils.errors import NumericalError

DEFAULT_THRESHOLD = 0.05
DEFAULT_N_PRED = 10


@dataclass
class VPTStats:
    """Valid prediction times of a set of trajectories, in seconds."""

    mean_s: float
    std_s: float
    per_traj: List[float] = field(default_factory=list)

    def to_dict(self):
        return {"mean_s": self.mean_s, "std_s": self.std_s, "per_traj": list(self.per_traj)}

    @classmethod
    def from_values(cls, values: List[float]) -> "VPTStats":
        arr = np.asarray(values, dtype=np.float64)
        return cls(mean_s=float(arr.mean()), std_s=float(arr.std()), per_traj=[float(v) for v in values])


def _as_batch(data) -> Batch:
    return data if isinstance(data, Batch) else Batch.from_dataset(data)


def one_step_mse(model: nn.Module, data) -> float:
    """Data loss over the whole dataset (a single batch of all trajectories)."""
    with torch.no_grad():
        return data_loss(model, _as_batch(data)).item()


def rollout_mse(model: nn.Module, data, n_pred: int = DEFAULT_N_PRED) -> float:
    """Rollout loss with horizon n_pred over the whole dataset."""
    with torch.no_grad():
        return rollout_loss(model, _as_batch(data), n_pred).item()


def physics_mse(model: nn.Module, data, params: PhysicalParams) -> float:
    """Physics loss at the dataset's own collocation times."""
    with torch.enable_grad():
        return physics_loss(model, _as_batch(data), params).detach().item()


def _rollout_prefix(model: nn.Module, s0: torch.Tensor, controls: torch.Tensor, T: float) -> torch.Tensor:
    """
    Rollout of a single trajectory; steps from the first non-finite state on are inf.
    """
    horizon = controls.shape[-2]
    try:
        return model.rollout(s0, controls, T)
    except NumericalError as e:
        step = e.get("step") or 0
        out = torch.full((horizon, s0.shape[-1]), float("inf"), dtype=torch.float64)
        if step > 0:
            out[:step] = model.rollout(s0, controls[:step], T)
        logging.debug(f"Rollout diverged at step {step}")
        return out


def rollout_predictions(model: nn.Module, states: torch.Tensor, controls: torch.Tensor, T: float,
                        horizon: Optional[int] = None) -> torch.Tensor:
    """
    Full rollouts from the first state of every trajectory.

    Args:
        states: (B, N_steps, 8) physical ground-truth states.
        controls: (B, N_steps - 1, 4) controls.
        T: Sampling period.
        horizon: Number of steps (defaults to N_steps - 1).

    Returns:
        (B, horizon, 9) predicted network states; a trajectory whose rollout
        becomes non-finite is inf from that step on.
    """
    horizon = controls.shape[1] if horizon is None else horizon
    s0 = to_net_state(states[:, 0])
    controls = controls[:, :horizon]
    with torch.no_grad():
        try:
            return model.rollout(s0, controls, T)
        except NumericalError:
            logging.warning("Batched rollout produced a non-finite state; evaluating trajectories one by one")
            return torch.stack([_rollout_prefix(model, s0[i], controls[i], T) for i in range(s0.shape[0])])


def position_errors(model: nn.Module, data, horizon: Optional[int] = None) -> torch.Tensor:
    """
    Euclidean position error sqrt(dx^2 + dy^2 + dz^2) after every rollout step.

    Returns:
        (B, horizon) errors in metres.
    """
    if isinstance(data, Trajectory):
        data = Dataset([data])
    tensors = data.to_tensors()
    states, controls = tensors["states"], tensors["controls"]
    horizon = controls.shape[1] if horizon is None else horizon
    pred = rollout_predictions(model, states, controls, data.T, horizon)
    delta = pred[..., :3] - states[:, 1:horizon + 1, :3]
    errors = torch.linalg.vector_norm(delta, dim=-1)
    return torch.nan_to_num(errors, nan=float("inf"))


def valid_steps(errors: torch.Tensor, threshold: float = DEFAULT_THRESHOLD) -> torch.Tensor:
    """Length of the leading run of steps whose error is <= threshold (strict prefix)."""
    within = (errors <= threshold).to(torch.int64)
    return torch.cumprod(within, dim=-1).sum(dim=-1)


def vpt(model: nn.Module, trajectory: Trajectory, threshold: float = DEFAULT_THRESHOLD,
        horizon: Optional[int] = None) -> float:
    """
    Valid prediction time of one trajectory in seconds.

    The model is rolled out from the first state over ``horizon`` steps
    (default N_steps - 1); VPT = k T with k the number of leading steps whose
    position error stays within ``threshold``.
    """
    if trajectory.n_steps < 2:
        raise ValueError("VPT needs a trajectory with at least two points")
    errors = position_errors(model, trajectory, horizon)[0]
    return valid_steps(errors, threshold).item() * trajectory.T


def vpt_suite(model: nn.Module, dataset: Dataset, threshold: float = DEFAULT_THRESHOLD,
              horizon: Optional[int] = None) -> VPTStats:
    """VPT of every trajectory with mean and (population) standard deviation."""
    errors = position_errors(model, dataset, horizon)
    steps = valid_steps(errors, threshold)
    return VPTStats.from_values([k * dataset.T for k in steps.tolist()])
