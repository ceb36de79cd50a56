"""
Residual PINC network mapping (initial network state, control, time) to the
network state at that time.
"""

import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional, Union

import torch
import torch.nn as nn

from datagen.sampling import to_net_state
from dynamics import CONTROL_DIM, NET_STATE_DIM, STATE_DIM
from dynamics.fossen import ArrayLike, as_tensor
from utils.errors import ConfigError, NumericalError

INPUT_DIM = NET_STATE_DIM + CONTROL_DIM + 1
OUTPUT_DIM = NET_STATE_DIM
ACTIVATIONS = ("adaptive_tanh", "adaptive_softplus")

# Indices into the network state.
X, Y, COS, SIN = 0, 1, 3, 4

_MIN_YAW_NORM_SQ = 1e-24

TimeLike = Union[float, torch.Tensor]


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 4
    n_hidden: int = 32
    activation: str = "adaptive_softplus"
    layer_norm_every_2nd: bool = True
    layer_norm_eps: float = 1e-5
    residual_connection: bool = True
    rotate_planar_increments: bool = True
    renormalize_yaw_on_rollout: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_layers < 1:
            raise ConfigError("model.n_layers", "must be >= 1")
        if self.n_hidden < 1:
            raise ConfigError("model.n_hidden", "must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ConfigError("model.activation", f"expected one of {ACTIVATIONS}, got {self.activation!r}")
        if self.layer_norm_eps < 0.0:
            raise ConfigError("model.layer_norm_eps", "must be >= 0")

    @classmethod
    def from_dict(cls, section: Dict[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        for key in section:
            if key not in known:
                raise ConfigError(f"model.{key}", "unknown key")
        return cls(**section)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def activation(x: torch.Tensor, beta: torch.Tensor, kind: str) -> torch.Tensor:
    """
    Adaptive activation with slope beta.

    adaptive_tanh: tanh(beta x)
    adaptive_softplus: log(1 + exp(beta x)) / beta, evaluated as logaddexp(beta x, 0)
    """
    z = beta * x
    if kind == "adaptive_tanh":
        return torch.tanh(z)
    if kind == "adaptive_softplus":
        return torch.logaddexp(z, torch.zeros_like(z)) / beta
    raise ValueError(f"Unknown activation {kind!r}")


class AdaptiveActivation(nn.Module):
    def __init__(self, kind: str):
        super().__init__()
        self.kind = kind
        self.beta = nn.Parameter(torch.ones((), dtype=torch.float64))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return activation(x, self.beta, self.kind)


class HiddenLayer(nn.Module):
    """Affine map, optional layer norm, adaptive activation."""

    def __init__(self, in_features: int, out_features: int, kind: str,
                 layer_norm: bool, eps: float):
        super().__init__()
        # Registration order fixes the canonical parameter ordering:
        # weight, bias, beta, then layer-norm gain and offset.
        self.linear = nn.Linear(in_features, out_features, dtype=torch.float64)
        self.activation = AdaptiveActivation(kind)
        self.norm = nn.LayerNorm(out_features, eps=eps, dtype=torch.float64) if layer_norm else None

    def pre_activation(self, x: torch.Tensor) -> torch.Tensor:
        h = self.linear(x)
        return self.norm(h) if self.norm is not None else h

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.activation(self.pre_activation(x))


class PINCNetwork(nn.Module):
    """
    Residual fully-connected network with adaptive activations.

    The trunk maps z = [ns0, u0, t] (14 inputs) to a 9-dim increment. Planar
    position increments are rotated from the body frame by the predicted yaw
    and the increment is added to ns0 when the residual connection is enabled.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        widths = [INPUT_DIM] + [config.n_hidden] * config.n_layers
        self.hidden = nn.ModuleList([
            HiddenLayer(widths[i], widths[i + 1], config.activation,
                        layer_norm=config.layer_norm_every_2nd and (i + 1) % 2 == 0,
                        eps=config.layer_norm_eps)
            for i in range(config.n_layers)
        ])
        self.output = nn.Linear(config.n_hidden, OUTPUT_DIM, dtype=torch.float64)

    def reset_parameters(self, seed: int) -> None:
        """Glorot-uniform weights, zero biases, beta = 1, layer-norm gain 1 and offset 0."""
        generator = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for layer in self.hidden:
                nn.init.xavier_uniform_(layer.linear.weight, generator=generator)
                nn.init.zeros_(layer.linear.bias)
                layer.activation.beta.fill_(1.0)
                if layer.norm is not None:
                    nn.init.ones_(layer.norm.weight)
                    nn.init.zeros_(layer.norm.bias)
            nn.init.xavier_uniform_(self.output.weight, generator=generator)
            nn.init.zeros_(self.output.bias)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def trunk(self, z: torch.Tensor) -> torch.Tensor:
        for layer in self.hidden:
            z = layer(z)
        return self.output(z)

    def layer_outputs(self, z: torch.Tensor) -> List[torch.Tensor]:
        """Output of every hidden layer and of the final linear layer."""
        outputs = []
        for layer in self.hidden:
            z = layer(z)
            outputs.append(z)
        outputs.append(self.output(z))
        return outputs

    def layer_names(self) -> List[str]:
        return [f"hidden_{i + 1}" for i in range(len(self.hidden))] + ["output"]

    def first_non_finite_layer(self, ns0: torch.Tensor, u0: torch.Tensor, t: TimeLike) -> Optional[str]:
        """Name of the first layer whose output holds a non-finite value, if any."""
        with torch.no_grad():
            z = self._trunk_input(ns0, u0, t)
            if not torch.isfinite(z).all():
                return "input"
            for name, out in zip(self.layer_names(), self.layer_outputs(z)):
                if not torch.isfinite(out).all():
                    return name
        return None

    def _trunk_input(self, ns0: torch.Tensor, u0: torch.Tensor, t: TimeLike) -> torch.Tensor:
        t = time_column(t, ns0.shape[:-1])
        u0 = u0.expand(*ns0.shape[:-1], CONTROL_DIM)
        return torch.cat((ns0, u0, t), dim=-1)

    def forward(self, ns0: ArrayLike, u0: ArrayLike, t: TimeLike) -> torch.Tensor:
        """
        Predicted network state at time t after ns0 under the constant control u0.

        Args:
            ns0: (..., 9) network states.
            u0: (..., 4) controls.
            t: Scalar or (...) / (..., 1) tensor of times in seconds.

        Returns:
            (..., 9) predicted network states.

        Raises:
            NumericalError: Non-finite output; the message names the first offending layer.
        """
        ns0 = as_tensor(ns0)
        u0 = as_tensor(u0)
        increment = self.trunk(self._trunk_input(ns0, u0, t))

        if self.config.residual_connection:
            yaw_cos = ns0[..., COS] + increment[..., COS]
            yaw_sin = ns0[..., SIN] + increment[..., SIN]
        else:
            yaw_cos, yaw_sin = increment[..., COS], increment[..., SIN]

        if self.config.rotate_planar_increments:
            inv_norm = torch.rsqrt(torch.clamp_min(yaw_cos * yaw_cos + yaw_sin * yaw_sin, _MIN_YAW_NORM_SQ))
            c, s = yaw_cos * inv_norm, yaw_sin * inv_norm
            dx_b, dy_b = increment[..., X], increment[..., Y]
            planar = torch.stack((c * dx_b - s * dy_b, s * dx_b + c * dy_b), dim=-1)
            increment = torch.cat((planar, increment[..., 2:]), dim=-1)

        out = ns0 + increment if self.config.residual_connection else increment
        if not torch.isfinite(out).all():
            raise NumericalError("network produced a non-finite output",
                                 layer=self.first_non_finite_layer(ns0, u0, t))
        return out

    def predict_step(self, state: ArrayLike, u: ArrayLike, T: float) -> torch.Tensor:
        """
        One-step prediction: forward evaluated at t = T.

        Accepts physical states (..., 8) or network states (..., 9).
        """
        state = as_tensor(state)
        if state.shape[-1] == STATE_DIM:
            state = to_net_state(state)
        return self.forward(state, u, T)

    def rollout(self, s0: ArrayLike, controls: ArrayLike, T: float) -> torch.Tensor:
        """
        Autoregressive prediction over the given controls.

        Args:
            s0: (..., 8) or (..., 9) initial states.
            controls: (..., N, 4) controls, N >= 1.
            T: Sampling period.

        Returns:
            (..., N, 9) predicted network states after each step.

        Raises:
            NumericalError: Non-finite state; carries the step index.
        """
        controls = as_tensor(controls)
        n_steps = controls.shape[-2]
        if n_steps < 1:
            raise ValueError("rollout needs at least one control")
        state = as_tensor(s0)
        if state.shape[-1] == STATE_DIM:
            state = to_net_state(state)

        states = []
        for k in range(n_steps):
            try:
                state = self.forward(state, controls[..., k, :], T)
            except NumericalError as e:
                raise NumericalError("rollout produced a non-finite state", step=k, **e.context) from e
            states.append(state)
            if self.config.renormalize_yaw_on_rollout and k + 1 < n_steps:
                state = renormalize_yaw(state)
        return torch.stack(states, dim=-2)


def time_column(t: TimeLike, batch_shape: torch.Size) -> torch.Tensor:
    """Broadcast a scalar or per-sample time to shape (*batch_shape, 1)."""
    t = as_tensor(t)
    if t.dim() == 0:
        return t.expand(*batch_shape, 1)
    if t.shape[-1] != 1 or t.dim() == len(batch_shape):
        t = t.unsqueeze(-1)
    return t.expand(*batch_shape, 1)


def renormalize_yaw(ns: torch.Tensor) -> torch.Tensor:
    """Project (cos psi, sin psi) back onto the unit circle."""
    yaw = ns[..., COS:SIN + 1]
    norm = torch.linalg.vector_norm(yaw, dim=-1, keepdim=True)
    return torch.cat((ns[..., :COS], yaw / norm, ns[..., SIN + 1:]), dim=-1)


def init_params(config: ModelConfig, seed: Optional[int] = None) -> PINCNetwork:
    """Build a network and initialize it deterministically from ``seed`` (defaults to config.seed)."""
    model = PINCNetwork(config)
    model.reset_parameters(config.seed if seed is None else seed)
    logging.debug(f"Initialized PINC network with {model.parameter_count()} parameters")
    return model
