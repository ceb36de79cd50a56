"""
Vehicle dynamics: physical parameters, 4-DOF equations of motion and the RK4 simulator.
"""

from .params import PhysicalParams, load_params, params_from_config, DEFAULT_PARAMS_FILE
from .fossen import (
    STATE_FIELDS, NET_STATE_FIELDS, CONTROL_FIELDS, STATE_DIM, NET_STATE_DIM, CONTROL_DIM,
    state_derivative, lifted_derivative, rotate_planar, as_tensor,
)
from .integrator import integrate_step, simulate_trajectory, rk4_step, rk4_flow, wrap_angle

__all__ = [
    'PhysicalParams', 'load_params', 'params_from_config', 'DEFAULT_PARAMS_FILE',
    'STATE_FIELDS', 'NET_STATE_FIELDS', 'CONTROL_FIELDS', 'STATE_DIM', 'NET_STATE_DIM', 'CONTROL_DIM',
    'state_derivative', 'lifted_derivative', 'rotate_planar', 'as_tensor',
    'integrate_step', 'simulate_trajectory', 'rk4_step', 'rk4_flow', 'wrap_angle',
]
