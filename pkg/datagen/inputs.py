"""
Control input channels: ramp profiles for training, sinusoids for dev/test, and
the per-channel scaling applied to every dataset.
"""

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

import numpy as np

from dynamics.fossen import ArrayLike
from utils.errors import ConfigError

Channel = Callable[[float], float]

INPUT_KINDS = ("ramp", "sine")

# Y, Z and the yaw moment are rescaled; Z is made non-negative (downward thrust only).
CONTROL_SCALE = np.array([1.0, 0.1, 5.0, 0.05])


@dataclass(frozen=True)
class InputSpec:
    kind: str = "ramp"
    amplitude: float = 1.0
    freq_range: Tuple[float, float] = (0.01, 0.2)
    phase_range: Tuple[float, float] = (0.0, 2.0 * math.pi)
    offset_variance: float = 0.25
    sign_probability: float = 0.5

    def __post_init__(self):
        if self.kind not in INPUT_KINDS:
            raise ConfigError("generation.input_kind", f"expected one of {INPUT_KINDS}, got {self.kind!r}")
        if self.freq_range[0] > self.freq_range[1]:
            raise ConfigError("generation.freq_range", "lower bound exceeds upper bound")
        if self.phase_range[0] > self.phase_range[1]:
            raise ConfigError("generation.phase_range", "lower bound exceeds upper bound")
        if self.offset_variance < 0.0:
            raise ConfigError("generation.offset_variance", "must be >= 0")
        if not 0.0 <= self.sign_probability <= 1.0:
            raise ConfigError("generation.sign_probability", "must lie in [0, 1]")


def ramp_value(t: float, t_total: float) -> float:
    """Triangle profile: 0 at t = 0, 1 at t_total / 2, back to 0 at t_total."""
    if t <= 0.5 * t_total:
        return 2.0 * t / t_total
    return 2.0 * (1.0 - t / t_total)


def make_ramp_channel(t_total: float, rng: np.random.Generator, spec: InputSpec) -> Channel:
    """
    Random-sign ramp with a Gaussian offset:
    channel(t) = sign * amplitude * ramp_value(t, t_total) + offset.
    """
    if spec.kind != "ramp":
        raise ValueError(f"ramp channel requested with input kind {spec.kind!r}")
    sign = 1.0 if rng.random() < spec.sign_probability else -1.0
    offset = rng.normal(0.0, math.sqrt(spec.offset_variance))

    def channel(t: float) -> float:
        return sign * spec.amplitude * ramp_value(t, t_total) + offset

    channel.sign, channel.offset = sign, offset
    return channel


def make_sine_channel(rng: np.random.Generator, spec: InputSpec) -> Channel:
    """channel(t) = A sin(2 pi f t + phi) with f and phi drawn uniformly from their ranges."""
    if spec.kind != "sine":
        raise ValueError(f"sine channel requested with input kind {spec.kind!r}")
    frequency = rng.uniform(*spec.freq_range)
    phase = rng.uniform(*spec.phase_range)

    def channel(t: float) -> float:
        return spec.amplitude * math.sin(2.0 * math.pi * frequency * t + phase)

    channel.frequency, channel.phase = frequency, phase
    return channel


def make_channels(spec: InputSpec, t_total: float, rng: np.random.Generator, count: int = 4) -> Sequence[Channel]:
    """Independent channels, one per control component."""
    if spec.kind == "ramp":
        return [make_ramp_channel(t_total, rng, spec) for _ in range(count)]
    return [make_sine_channel(rng, spec) for _ in range(count)]


def scale_controls(raw: ArrayLike) -> np.ndarray:
    """
    Map raw channel values (..., 4) to the applied wrench:
    X' = X, Y' = 0.1 Y, Z' = |5 Z|, Psi' = 0.05 Psi.
    """
    scaled = np.asarray(raw, dtype=np.float64) * CONTROL_SCALE
    scaled[..., 2] = np.abs(scaled[..., 2])
    return scaled
