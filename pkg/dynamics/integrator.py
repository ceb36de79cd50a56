"""
Fixed-step classical Runge-Kutta integration with zero-order-hold controls.
"""

import math
from typing import Callable

import torch

from dynamics.fossen import ArrayLike, as_tensor, state_derivative
from dynamics.params import PhysicalParams
from utils.errors import NumericalError

RateFn = Callable[[torch.Tensor, torch.Tensor], torch.Tensor]

DEFAULT_SUBSTEPS = 10


def rk4_step(rate_fn: RateFn, x: torch.Tensor, u: torch.Tensor, h) -> torch.Tensor:
    """
    One classical RK4 step of x' = rate_fn(x, u) with u held constant.

    ``h`` may be a float or a tensor broadcastable against x[..., :1]; a tensor
    step keeps the result differentiable with respect to the step length.
    """
    k1 = rate_fn(x, u)
    k2 = rate_fn(x + 0.5 * h * k1, u)
    k3 = rate_fn(x + 0.5 * h * k2, u)
    k4 = rate_fn(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_flow(rate_fn: RateFn, x: torch.Tensor, u: torch.Tensor, dt, substeps: int) -> torch.Tensor:
    """Apply ``substeps`` RK4 steps of length dt / substeps."""
    if substeps < 1:
        raise ValueError(f"substeps must be >= 1, got {substeps}")
    h = dt / substeps
    for _ in range(substeps):
        x = rk4_step(rate_fn, x, u, h)
    return x


def wrap_angle(psi: torch.Tensor) -> torch.Tensor:
    """Map angles to the principal range (-pi, pi]."""
    return math.pi - torch.remainder(math.pi - psi, 2.0 * math.pi)


def integrate_step(state: ArrayLike, control: ArrayLike, dt: float, params: PhysicalParams,
                   substeps: int = DEFAULT_SUBSTEPS) -> torch.Tensor:
    """
    Advance physical states by dt under a constant control.

    Args:
        state: (..., 8) states.
        control: (..., 4) controls held over the step.
        dt: Step length in seconds (>= 0).
        params: Physical parameters.
        substeps: RK4 substeps per step (>= 1).

    Returns:
        (..., 8) states with yaw wrapped to (-pi, pi].

    Raises:
        NumericalError: Non-finite result.
    """
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    state = as_tensor(state)
    control = as_tensor(control)

    def rate_fn(x, u):
        return state_derivative(x, u, params)

    nxt = rk4_flow(rate_fn, state, control, dt, substeps)
    if not torch.isfinite(nxt).all():
        raise NumericalError("simulator produced a non-finite state; check parameters and step size",
                             dt=dt, substeps=substeps)
    return torch.cat((nxt[..., :3], wrap_angle(nxt[..., 3:4]), nxt[..., 4:]), dim=-1)


def simulate_trajectory(x0: ArrayLike, controls: ArrayLike, T: float, params: PhysicalParams,
                        substeps: int = DEFAULT_SUBSTEPS) -> torch.Tensor:
    """
    Simulate one or many trajectories with zero-order-hold controls.

    Args:
        x0: (..., 8) initial states.
        controls: (..., N_steps - 1, 4) controls, one per sampling interval.
        T: Sampling period in seconds (> 0).
        params: Physical parameters.
        substeps: RK4 substeps per sampling interval.

    Returns:
        (..., N_steps, 8) states; states[..., n + 1, :] = integrate_step(states[..., n, :], controls[..., n, :], T).
    """
    if T <= 0:
        raise ValueError(f"T must be > 0, got {T}")
    state = as_tensor(x0)
    controls = as_tensor(controls)
    states = [state]
    with torch.no_grad():
        for n in range(controls.shape[-2]):
            try:
                state = integrate_step(state, controls[..., n, :], T, params, substeps)
            except NumericalError as e:
                raise NumericalError(str(e), step=n) from e
            states.append(state)
    return torch.stack(states, dim=-2)
