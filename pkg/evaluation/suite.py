"""
Evaluation sets and the full evaluation report.

Labels:
    L1  log10 one-step loss on the dev set
    L2  log10 rollout loss on the dev set
    L3  log10 physics loss on the dev set
    L4  log10 one-step loss on the interpolation test set
    L5  log10 one-step loss on the extrapolation test set
    VPT1..VPT3  valid prediction times on dev / interp / extrap
"""

import logging
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Optional

import torch.nn as nn

from datagen.generator import Dataset, GenerationConfig, generate_dataset
from dynamics import PhysicalParams
from evaluation.metrics import (
    DEFAULT_N_PRED, DEFAULT_THRESHOLD, VPTStats, one_step_mse, physics_mse, rollout_mse, vpt_suite,
)
from utils.errors import ConfigError, DatasetError
from utils.helpers import log10_floor

logger = logging.getLogger(__name__)

EVAL_SPLITS = ("dev", "interp", "extrap")
# Test sampling periods relative to the training period.
PERIOD_FACTORS = {"dev": 1.0, "interp": 0.75, "extrap": 1.25}


@dataclass(frozen=True)
class EvalConfig:
    threshold: float = DEFAULT_THRESHOLD
    n_pred: int = DEFAULT_N_PRED
    log_floor: float = -12.0
    plot_trajectories: int = 4

    def __post_init__(self):
        if self.threshold <= 0.0:
            raise ConfigError("eval.threshold", "must be > 0")
        if self.n_pred < 1:
            raise ConfigError("eval.n_pred", "must be >= 1")
        if self.plot_trajectories < 0:
            raise ConfigError("eval.plot_trajectories", "must be >= 0")

    @classmethod
    def from_dict(cls, section: Dict[str, Any]) -> "EvalConfig":
        known = {f.name for f in fields(cls)}
        for key in section:
            if key not in known:
                raise ConfigError(f"eval.{key}", "unknown key")
        return cls(**section)


def eval_period(base_period: float, split: str) -> float:
    return round(base_period * PERIOD_FACTORS[split], 12)


def build_eval_sets(base: GenerationConfig, params: PhysicalParams,
                    seeds: Optional[Dict[str, int]] = None, jobs: int = 1) -> Dict[str, Dataset]:
    """
    Dev, interpolation and extrapolation sets sharing one initial-condition and
    input protocol and differing only in the sampling period (T, 0.75 T, 1.25 T).

    Args:
        base: Dev-set generation config (sine inputs, zero initial state except yaw).
        params: Simulator parameters.
        seeds: Seed per split; defaults to base.seed for dev and base.seed + 1,
            + 2 for the test splits. The base seed must differ from the
            training seed.
        jobs: Worker processes for the simulation.
    """
    if base.inputs.kind != "sine":
        raise ConfigError("generation.input_kind", "evaluation sets use sine inputs")
    seeds = seeds or {split: base.seed + i for i, split in enumerate(EVAL_SPLITS)}
    sets = {}
    for split in EVAL_SPLITS:
        config = replace(base, sample_period=eval_period(base.sample_period, split), seed=seeds[split])
        sets[split] = generate_dataset(config, params, jobs=jobs)
    return sets


@dataclass
class EvalReport:
    L1: float
    L2: float
    L3: float
    L4: float
    L5: float
    VPT1: VPTStats
    VPT2: VPTStats
    VPT3: VPTStats
    threshold_m: float
    horizon_s: float
    config_echo: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "config_echo": self.config_echo,
            "L1": self.L1, "L2": self.L2, "L3": self.L3, "L4": self.L4, "L5": self.L5,
            "VPT1": self.VPT1.to_dict(), "VPT2": self.VPT2.to_dict(), "VPT3": self.VPT3.to_dict(),
            "threshold_m": self.threshold_m,
            "horizon_s": self.horizon_s,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EvalReport":
        return cls(
            L1=data["L1"], L2=data["L2"], L3=data["L3"], L4=data["L4"], L5=data["L5"],
            VPT1=VPTStats(**data["VPT1"]), VPT2=VPTStats(**data["VPT2"]), VPT3=VPTStats(**data["VPT3"]),
            threshold_m=data["threshold_m"], horizon_s=data["horizon_s"],
            config_echo=data.get("config_echo", {}),
        )


def full_report(model: nn.Module, sets: Dict[str, Dataset], params: PhysicalParams,
                config: Optional[EvalConfig] = None,
                config_echo: Optional[Dict[str, Any]] = None) -> EvalReport:
    """
    Compute L1-L5 and VPT1-VPT3.

    Args:
        model: Trained network.
        sets: ``dev``, ``interp`` and ``extrap`` datasets.
        params: Simulator parameters for the physics loss.
        config: Evaluation settings.
        config_echo: Configuration stored in the report.

    Raises:
        DatasetError: A split is missing.
        ConfigError: The rollout horizon does not fit the dev set.
    """
    config = config or EvalConfig()
    missing = [split for split in EVAL_SPLITS if split not in sets]
    if missing:
        raise DatasetError(f"evaluation needs the splits {list(EVAL_SPLITS)}; missing {missing}")
    dev, interp, extrap = sets["dev"], sets["interp"], sets["extrap"]
    if config.n_pred >= dev.n_steps:
        raise ConfigError("eval.n_pred", f"rollout horizon {config.n_pred} needs more than {config.n_pred} points "
                                         f"per trajectory, dev set has {dev.n_steps}")

    floor = config.log_floor
    report = EvalReport(
        L1=log10_floor(one_step_mse(model, dev), floor),
        L2=log10_floor(rollout_mse(model, dev, config.n_pred), floor),
        L3=log10_floor(physics_mse(model, dev, params), floor),
        L4=log10_floor(one_step_mse(model, interp), floor),
        L5=log10_floor(one_step_mse(model, extrap), floor),
        VPT1=vpt_suite(model, dev, config.threshold),
        VPT2=vpt_suite(model, interp, config.threshold),
        VPT3=vpt_suite(model, extrap, config.threshold),
        threshold_m=config.threshold,
        horizon_s=(dev.n_steps - 1) * dev.T,
        config_echo=config_echo or {},
    )
    logger.info(f"L1={report.L1:.3f} L2={report.L2:.3f} L3={report.L3:.3f} L4={report.L4:.3f} L5={report.L5:.3f} "
                f"VPT1={report.VPT1.mean_s:.2f}s VPT2={report.VPT2.mean_s:.2f}s VPT3={report.VPT3.mean_s:.2f}s")
    return report
