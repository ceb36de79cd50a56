"""
Simplified 4-DOF Fossen equations of motion (surge, sway, heave, yaw).

State layout (StateVector, 8): [x, y, z, psi, u, v, w, r]
Lifted layout (NetState, 9):   [x, y, z, cos_psi, sin_psi, u, v, w, r]
Control layout (ControlInput, 4): [X, Y, Z, Psi_m]

All functions are batched over leading dimensions and differentiable with
torch.autograd; the same right-hand side drives the simulator and the physics loss.
"""

from typing import Union

import numpy as np
import torch

from dynamics.params import PhysicalParams

STATE_FIELDS = ("x", "y", "z", "psi", "u", "v", "w", "r")
NET_STATE_FIELDS = ("x", "y", "z", "cos_psi", "sin_psi", "u", "v", "w", "r")
CONTROL_FIELDS = ("X", "Y", "Z", "Psi_m")

STATE_DIM = len(STATE_FIELDS)
NET_STATE_DIM = len(NET_STATE_FIELDS)
CONTROL_DIM = len(CONTROL_FIELDS)

ArrayLike = Union[torch.Tensor, np.ndarray, list, tuple]


def as_tensor(values: ArrayLike) -> torch.Tensor:
    """float64 tensor view of array-like input (tensors keep their autograd graph)."""
    if isinstance(values, torch.Tensor):
        return values if values.dtype == torch.float64 else values.to(torch.float64)
    return torch.as_tensor(np.asarray(values, dtype=np.float64))


def _body_accelerations(u, v, w, r, control: torch.Tensor, p: PhysicalParams) -> torch.Tensor:
    X, Y, Z, Psi_m = control.unbind(-1)
    weight = p.m * p.g
    buoyancy = p.rho_water * p.g * p.V_sub

    u_dot = (X + (p.m - p.Y_dv) * v * r + (p.X_u + p.X_uu * torch.abs(u)) * u) / (p.m - p.X_du)
    v_dot = (Y - (p.m - p.X_du) * u * r + (p.Y_v + p.Y_vv * torch.abs(v)) * v) / (p.m - p.Y_dv)
    w_dot = (Z + (p.Z_w + p.Z_ww * torch.abs(w)) * w + weight - buoyancy) / (p.m - p.Z_dw)
    r_dot = (Psi_m - (p.X_du - p.Y_dv) * u * v + (p.N_r + p.N_rr * torch.abs(r)) * r) / (p.I_zz - p.N_dr)
    return torch.stack((u_dot, v_dot, w_dot, r_dot), dim=-1)


def state_derivative(state: ArrayLike, control: ArrayLike, params: PhysicalParams) -> torch.Tensor:
    """
    Time derivative of the physical state.

    Buoyancy enters as rho_water * g * V_sub so that it has units of force,
    balanced against the weight m * g.

    Args:
        state: (..., 8) states [x, y, z, psi, u, v, w, r].
        control: (..., 4) body wrench [X, Y, Z, Psi_m].
        params: Physical parameters.

    Returns:
        (..., 8) state rates.
    """
    state = as_tensor(state)
    control = as_tensor(control)
    _, _, _, psi, u, v, w, r = state.unbind(-1)
    x_dot, y_dot = rotate_planar(torch.cos(psi), torch.sin(psi), u, v)

    kinematics = torch.stack((x_dot, y_dot, w, r), dim=-1)
    return torch.cat((kinematics, _body_accelerations(u, v, w, r, control, params)), dim=-1)


def lifted_derivative(net_state: ArrayLike, control: ArrayLike, params: PhysicalParams) -> torch.Tensor:
    """
    Time derivative in the (cos psi, sin psi) representation.

    d(cos psi)/dt = -sin psi * r and d(sin psi)/dt = cos psi * r. The yaw pair is
    used as given (no renormalization) so the residual sees the network's own output.

    Args:
        net_state: (..., 9) lifted states.
        control: (..., 4) controls.
        params: Physical parameters.

    Returns:
        (..., 9) lifted state rates.
    """
    net_state = as_tensor(net_state)
    control = as_tensor(control)
    _, _, _, cos_psi, sin_psi, u, v, w, r = net_state.unbind(-1)

    x_dot, y_dot = rotate_planar(cos_psi, sin_psi, u, v)

    kinematics = torch.stack((x_dot, y_dot, w, -sin_psi * r, cos_psi * r), dim=-1)
    return torch.cat((kinematics, _body_accelerations(u, v, w, r, control, params)), dim=-1)


def rotate_planar(cos_psi: torch.Tensor, sin_psi: torch.Tensor,
                  dx_body: torch.Tensor, dy_body: torch.Tensor):
    """Rotate a body-frame planar vector into the world frame by yaw."""
    return cos_psi * dx_body - sin_psi * dy_body, sin_psi * dx_body + cos_psi * dy_body
