"""
Dataset generation: initial states, input channels, ground-truth simulation
and collocation times, deterministic per (config, seed).
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Any, Dict, Iterator, List, Optional, Sequence

import numpy as np
import torch

from datagen.inputs import InputSpec, make_channels, scale_controls
from datagen.sampling import SamplingRanges, lhs_collocation, sample_initial_state
from dynamics import CONTROL_DIM, STATE_DIM, PhysicalParams, simulate_trajectory
from utils.errors import ConfigError, DatasetError
from utils.helpers import chunker

logger = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.PCG64"
MANIFEST_VERSION = 1
COLLOC_PLACEMENTS = ("lhs", "end")

# Trajectories are simulated in fixed index blocks so serial and parallel runs
# evaluate identical tensor shapes.
SIMULATION_CHUNK = 64


@dataclass(frozen=True)
class GenerationConfig:
    n_traj: int = 400
    sample_period: float = 0.08
    n_steps: int = 66
    substeps: int = 10
    inputs: InputSpec = field(default_factory=InputSpec)
    ranges: SamplingRanges = field(default_factory=SamplingRanges)
    n_colloc: int = 1
    colloc_placement: str = "lhs"
    seed: int = 0

    def __post_init__(self):
        if self.n_traj < 1:
            raise ConfigError("generation.n_traj", "must be >= 1")
        if self.sample_period <= 0.0:
            raise ConfigError("generation.sample_period", "must be > 0")
        if self.n_steps < 2:
            raise ConfigError("generation.n_steps", "must be >= 2")
        if self.substeps < 1:
            raise ConfigError("generation.substeps", "must be >= 1")
        if self.n_colloc < 1:
            raise ConfigError("generation.n_colloc", "must be >= 1")
        if self.colloc_placement not in COLLOC_PLACEMENTS:
            raise ConfigError("generation.colloc_placement", f"expected one of {COLLOC_PLACEMENTS}")
        if self.colloc_placement == "end" and self.n_colloc != 1:
            raise ConfigError("generation.n_colloc", "'end' placement uses exactly one collocation point")

    @property
    def t_total(self) -> float:
        return (self.n_steps - 1) * self.sample_period

    @classmethod
    def from_dict(cls, section: Dict[str, Any]) -> "GenerationConfig":
        """Build from the ``generation`` config section."""
        section = dict(section)
        input_keys = {f.name for f in fields(InputSpec)}
        spec_values = {}
        if "input_kind" in section:
            spec_values["kind"] = section.pop("input_kind")
        for key in list(section):
            if key in input_keys:
                spec_values[key] = section.pop(key)
        for key in ("freq_range", "phase_range"):
            if key in spec_values:
                spec_values[key] = tuple(float(v) for v in spec_values[key])
        ranges = SamplingRanges.from_dict(section.pop("ranges", {}))

        known = {f.name for f in fields(cls)} - {"inputs", "ranges"}
        for key in section:
            if key not in known:
                raise ConfigError(f"generation.{key}", "unknown key")
        return cls(
            inputs=InputSpec(**spec_values),
            ranges=ranges,
            n_traj=int(section.get("n_traj", cls.n_traj)),
            sample_period=float(section.get("sample_period", cls.sample_period)),
            n_steps=int(section.get("n_steps", cls.n_steps)),
            substeps=int(section.get("substeps", cls.substeps)),
            n_colloc=int(section.get("n_colloc", cls.n_colloc)),
            colloc_placement=str(section.get("colloc_placement", cls.colloc_placement)),
            seed=int(section.get("seed", cls.seed)),
        )

    def to_dict(self) -> Dict[str, Any]:
        spec = self.inputs
        return {
            "n_traj": self.n_traj,
            "sample_period": self.sample_period,
            "n_steps": self.n_steps,
            "substeps": self.substeps,
            "input_kind": spec.kind,
            "amplitude": spec.amplitude,
            "freq_range": list(spec.freq_range),
            "phase_range": list(spec.phase_range),
            "offset_variance": spec.offset_variance,
            "sign_probability": spec.sign_probability,
            "n_colloc": self.n_colloc,
            "colloc_placement": self.colloc_placement,
            "ranges": self.ranges.to_dict(),
            "seed": self.seed,
        }


@dataclass
class Trajectory:
    """
    One simulated trajectory.

    Attributes:
        T: Sampling period in seconds.
        states: (N_steps, 8) physical states.
        controls: (N_steps - 1, 4) zero-order-hold controls.
        colloc_times: (N_steps - 1, N_P) collocation times per interval, each in [0, T].
    """

    T: float
    states: np.ndarray
    controls: np.ndarray
    colloc_times: np.ndarray

    def __post_init__(self):
        n_steps = self.states.shape[0]
        if self.states.ndim != 2 or self.states.shape[1] != STATE_DIM:
            raise DatasetError(f"states must have shape (N_steps, {STATE_DIM}), got {self.states.shape}")
        if self.controls.shape != (n_steps - 1, CONTROL_DIM):
            raise DatasetError(f"controls must have shape ({n_steps - 1}, {CONTROL_DIM}), got {self.controls.shape}")
        if self.colloc_times.ndim != 2 or self.colloc_times.shape[0] != n_steps - 1:
            raise DatasetError(f"colloc_times must have {n_steps - 1} rows, got {self.colloc_times.shape}")
        if (self.colloc_times < 0.0).any() or (self.colloc_times > self.T).any():
            raise DatasetError(f"collocation times must lie in [0, {self.T}]")

    @property
    def n_steps(self) -> int:
        return self.states.shape[0]

    @property
    def n_colloc(self) -> int:
        return self.colloc_times.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.T


@dataclass
class Dataset:
    trajectories: List[Trajectory]
    manifest: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.trajectories:
            raise DatasetError("dataset holds no trajectories")
        first = self.trajectories[0]
        for i, traj in enumerate(self.trajectories):
            if (traj.T, traj.n_steps, traj.n_colloc) != (first.T, first.n_steps, first.n_colloc):
                raise DatasetError(
                    f"trajectory {i} has (T, N_steps, N_P) = {(traj.T, traj.n_steps, traj.n_colloc)}, "
                    f"expected {(first.T, first.n_steps, first.n_colloc)}"
                )

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def T(self) -> float:
        return self.trajectories[0].T

    @property
    def n_steps(self) -> int:
        return self.trajectories[0].n_steps

    @property
    def n_colloc(self) -> int:
        return self.trajectories[0].n_colloc

    def to_tensors(self, indices: Optional[Sequence[int]] = None) -> Dict[str, torch.Tensor]:
        """
        Stack trajectories into float64 tensors.

        Returns:
            Dictionary with ``states`` (B, N_steps, 8), ``controls`` (B, N_steps - 1, 4)
            and ``colloc_times`` (B, N_steps - 1, N_P).
        """
        selected = self.trajectories if indices is None else [self.trajectories[i] for i in indices]
        return {
            "states": torch.as_tensor(np.stack([t.states for t in selected]), dtype=torch.float64),
            "controls": torch.as_tensor(np.stack([t.controls for t in selected]), dtype=torch.float64),
            "colloc_times": torch.as_tensor(np.stack([t.colloc_times for t in selected]), dtype=torch.float64),
        }

    def batches(self, batch_size: int, rng: Optional[np.random.Generator] = None) -> Iterator[np.ndarray]:
        """Trajectory index batches; shuffled when an rng is given. The last batch may be shorter."""
        if batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        order = np.arange(len(self)) if rng is None else rng.permutation(len(self))
        return chunker(order, batch_size)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Independent PCG64 stream for trajectory ``index``, fixed by (seed, index) alone."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(index,))))


def _draw_trajectory_inputs(config: GenerationConfig, rng: np.random.Generator):
    """Initial state, scaled ZOH controls and collocation times for one trajectory."""
    x0 = sample_initial_state(config.ranges, rng)
    channels = make_channels(config.inputs, config.t_total, rng)
    sample_times = np.arange(config.n_steps - 1) * config.sample_period
    raw = np.array([[channel(t) for channel in channels] for t in sample_times])
    controls = scale_controls(raw)

    if config.colloc_placement == "end":
        colloc = np.full((config.n_steps - 1, 1), config.sample_period)
    else:
        colloc = np.stack([lhs_collocation(config.n_colloc, config.sample_period, rng)
                           for _ in range(config.n_steps - 1)])
    return x0, controls, colloc


def _simulate_block(x0: np.ndarray, controls: np.ndarray, T: float,
                    params: PhysicalParams, substeps: int) -> np.ndarray:
    torch.set_num_threads(1)
    return simulate_trajectory(x0, controls, T, params, substeps).numpy()


def generate_dataset(config: GenerationConfig, params: PhysicalParams,
                     seed: Optional[int] = None, jobs: int = 1) -> Dataset:
    """
    Generate a dataset of simulated trajectories.

    Args:
        config: Generation settings.
        params: Physical parameters of the simulator.
        seed: Overrides ``config.seed`` when given.
        jobs: Worker processes for the simulation; results do not depend on it.

    Returns:
        Dataset whose manifest echoes the config, seed and RNG algorithm.
    """
    seed = config.seed if seed is None else seed
    params.validate()
    start = time.time()
    logger.info(f"Generating {config.n_traj} trajectories ({config.inputs.kind} inputs, "
                f"T={config.sample_period}, N_steps={config.n_steps}, seed={seed})")

    x0s, controls, collocs = [], [], []
    for i in range(config.n_traj):
        x0, u, colloc = _draw_trajectory_inputs(config, trajectory_rng(seed, i))
        x0s.append(x0)
        controls.append(u)
        collocs.append(colloc)
    x0s = np.stack(x0s)
    controls = np.stack(controls)

    blocks = list(chunker(range(config.n_traj), SIMULATION_CHUNK))
    args = [(x0s[b.start:b.stop], controls[b.start:b.stop], config.sample_period, params, config.substeps)
            for b in blocks]
    if jobs > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_simulate_block, *zip(*args)))
    else:
        results = [_simulate_block(*a) for a in args]
    states = np.concatenate(results, axis=0)

    trajectories = [
        Trajectory(T=config.sample_period, states=states[i], controls=controls[i], colloc_times=collocs[i])
        for i in range(config.n_traj)
    ]
    manifest = {
        "version": MANIFEST_VERSION,
        "generation": {**config.to_dict(), "seed": seed},
        "params": params.to_dict(),
        "seed": seed,
        "rng": RNG_ALGORITHM,
        "n_traj": config.n_traj,
        "n_steps": config.n_steps,
        "sample_period": config.sample_period,
        "t_total": config.t_total,
        "n_colloc": config.n_colloc,
    }
    logger.info(f"Generated {config.n_traj} trajectories in {time.time() - start:.2f}s")
    return Dataset(trajectories=trajectories, manifest=manifest)


def resample_collocation(dataset: Dataset, n_colloc: int, seed: int, placement: str = "lhs") -> Dataset:
    """
    Copy of a dataset with fresh collocation times (states and controls unchanged).

    Each trajectory draws from its own stream, fixed by (seed, index).
    """
    if placement not in COLLOC_PLACEMENTS:
        raise ConfigError("generation.colloc_placement", f"expected one of {COLLOC_PLACEMENTS}")
    if placement == "end" and n_colloc != 1:
        raise ConfigError("generation.n_colloc", "'end' placement uses exactly one collocation point")
    trajectories = []
    for i, traj in enumerate(dataset.trajectories):
        n_intervals = traj.n_steps - 1
        if placement == "end":
            colloc = np.full((n_intervals, 1), traj.T)
        else:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(i, 1))))
            colloc = np.stack([lhs_collocation(n_colloc, traj.T, rng) for _ in range(n_intervals)])
        trajectories.append(Trajectory(T=traj.T, states=traj.states, controls=traj.controls, colloc_times=colloc))
    manifest = dict(dataset.manifest)
    manifest["n_colloc"] = n_colloc
    manifest["colloc_resampled"] = {"n_colloc": n_colloc, "placement": placement, "seed": seed}
    logger.info(f"Resampled {n_colloc} collocation point(s) per interval ({placement})")
    return Dataset(trajectories=trajectories, manifest=manifest)
