"""
Random initial states, Latin hypercube collocation times and the yaw lift
between physical states and network states.
"""

import math
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict

import numpy as np
import torch

from dynamics.fossen import ArrayLike, as_tensor
from utils.errors import ConfigError


@dataclass(frozen=True)
class SamplingRanges:
    """Half-widths of the uniform initial-state intervals (w is drawn from [0, w_max])."""

    x_max: float = 0.0
    y_max: float = 0.0
    z_max: float = 0.0
    psi_max: float = math.pi
    u_max: float = 0.0
    v_max: float = 0.0
    w_max: float = 0.0
    r_max: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0.0:
                raise ConfigError(f"generation.ranges.{f.name}", "must be >= 0")

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "SamplingRanges":
        known = {f.name for f in fields(cls)}
        for key in values:
            if key not in known:
                raise ConfigError(f"generation.ranges.{key}", "unknown key")
        return cls(**{k: float(v) for k, v in values.items()})

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def sample_initial_state(ranges: SamplingRanges, rng: np.random.Generator) -> np.ndarray:
    """
    Draw one physical state [x, y, z, psi, u, v, w, r] component-wise uniformly.

    w is drawn from [0, w_max] so that the vehicle starts level or diving.
    """
    return np.array([
        rng.uniform(-ranges.x_max, ranges.x_max),
        rng.uniform(-ranges.y_max, ranges.y_max),
        rng.uniform(-ranges.z_max, ranges.z_max),
        rng.uniform(-ranges.psi_max, ranges.psi_max),
        rng.uniform(-ranges.u_max, ranges.u_max),
        rng.uniform(-ranges.v_max, ranges.v_max),
        rng.uniform(0.0, ranges.w_max),
        rng.uniform(-ranges.r_max, ranges.r_max),
    ], dtype=np.float64)


def lhs_collocation(n_points: int, T: float, rng: np.random.Generator) -> np.ndarray:
    """
    One-dimensional Latin hypercube sample on [0, T].

    Exactly one point is drawn uniformly inside each stratum [i T / N, (i + 1) T / N);
    the order of the strata is shuffled.
    """
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    strata = rng.permutation(n_points)
    return (strata + rng.uniform(0.0, 1.0, size=n_points)) * (T / n_points)


def to_net_state(state: ArrayLike) -> torch.Tensor:
    """(..., 8) physical states -> (..., 9) network states with psi -> (cos psi, sin psi)."""
    state = as_tensor(state)
    psi = state[..., 3:4]
    return torch.cat((state[..., :3], torch.cos(psi), torch.sin(psi), state[..., 4:]), dim=-1)


def from_net_state(net_state: ArrayLike) -> torch.Tensor:
    """
    (..., 9) network states -> (..., 8) physical states, psi = atan2(sin, cos).

    Raises:
        ValueError: A yaw pair equal to (0, 0).
    """
    net_state = as_tensor(net_state)
    cos_psi, sin_psi = net_state[..., 3:4], net_state[..., 4:5]
    if ((cos_psi == 0.0) & (sin_psi == 0.0)).any():
        raise ValueError("yaw pair (cos, sin) = (0, 0) has no angle")
    return torch.cat((net_state[..., :3], torch.atan2(sin_psi, cos_psi), net_state[..., 5:]), dim=-1)
