"""
Training loop: batching, input noise, per-loss gradients, gradient combination,
AdamW updates and plateau scheduling.
"""

import logging
import math
import os
import time
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import torch
from torch.nn.utils import parameters_to_vector, vector_to_parameters

from autodiff.derivatives import loss_gradient
from datagen.generator import Dataset
from dynamics import PhysicalParams
from gradcombine.combiners import GRAD_SCHEMES, clip_norm, combine_gradients
from losses.pinc_losses import LOSS_NAMES, Batch, LossWeights, data_loss, loss_evaluator
from model.checkpoint import save_checkpoint
from model.network import ModelConfig, PINCNetwork, init_params
from trainer.optim import PlateauScheduler, adamw_step, current_lr, make_optimizer
from utils.errors import ConfigError, NumericalError
from utils.helpers import chunker, ensure_directory_exists, log10_floor

logger = logging.getLogger(__name__)

NOISE_MODES = ("per_point", "per_trajectory")
METRIC_COLUMNS = {
    "data": "log10_L_data",
    "phy": "log10_L_phy",
    "ic": "log10_L_ic",
    "roll": "log10_L_roll",
    "phy_roll": "log10_L_phyroll",
}
METRICS_HEADER = ["epoch"] + list(METRIC_COLUMNS.values()) + ["log10_L_dev", "lr", "seconds"]
WALL_CLOCK_COLUMNS = ["seconds"]
INITIAL_EPOCH = -1


@dataclass(frozen=True)
class TrainConfig:
    n_epoch: int = 1200
    batch_size: int = 10
    lr0: float = 8e-3
    lr_min: float = 1e-4
    patience: int = 100
    lr_factor: float = 0.5
    use_scheduler: bool = True
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-2
    losses: Tuple[str, ...] = ("data", "phy")
    weights: LossWeights = field(default_factory=LossWeights)
    grad_scheme: str = "norm"
    clip: float = 5.0
    clip_enabled: bool = True
    noise_sigma: float = 0.0
    noise_mode: str = "per_point"
    shuffle: bool = True
    checkpoint_every: int = 0
    log_every: int = 10
    parallel: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_epoch < 0:
            raise ConfigError("train.n_epoch", "must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("train.batch_size", "must be >= 1")
        if not self.lr0 > self.lr_min > 0.0:
            raise ConfigError("train.lr0", f"need lr0 > lr_min > 0, got lr0={self.lr0}, lr_min={self.lr_min}")
        if self.patience < 1:
            raise ConfigError("train.patience", "must be >= 1")
        if not 0.0 < self.lr_factor < 1.0:
            raise ConfigError("train.lr_factor", "must lie in (0, 1)")
        if not self.losses:
            raise ConfigError("train.losses", "at least one loss must be active")
        for name in self.losses:
            if name not in LOSS_NAMES:
                raise ConfigError("train.losses", f"unknown loss {name!r}; expected a subset of {LOSS_NAMES}")
        if len(set(self.losses)) != len(self.losses):
            raise ConfigError("train.losses", "duplicate loss names")
        if self.grad_scheme not in GRAD_SCHEMES:
            raise ConfigError("train.grad_scheme", f"expected one of {GRAD_SCHEMES}, got {self.grad_scheme!r}")
        if self.clip <= 0.0:
            raise ConfigError("train.clip", "must be > 0")
        if self.noise_sigma < 0.0:
            raise ConfigError("train.noise_sigma", "must be >= 0")
        if self.noise_mode not in NOISE_MODES:
            raise ConfigError("train.noise_mode", f"expected one of {NOISE_MODES}")
        if self.checkpoint_every < 0:
            raise ConfigError("train.checkpoint_every", "must be >= 0")

    @property
    def active_losses(self) -> Tuple[str, ...]:
        """Active losses in canonical order (fixes the gradient accumulation order)."""
        return tuple(name for name in LOSS_NAMES if name in self.losses)

    @classmethod
    def from_dict(cls, section: Dict[str, Any]) -> "TrainConfig":
        section = dict(section)
        known = {f.name for f in fields(cls)} | {"n_pred"}
        for key in section:
            if key not in known:
                raise ConfigError(f"train.{key}", "unknown key")
        n_pred = section.pop("n_pred", LossWeights.n_pred)
        weights = LossWeights.from_dict(section.pop("weights", {}), n_pred=n_pred)
        if "betas" in section:
            section["betas"] = tuple(float(b) for b in section["betas"])
        if "losses" in section:
            section["losses"] = tuple(section["losses"])
        return cls(weights=weights, **section)

    def to_dict(self) -> Dict[str, Any]:
        w = self.weights
        return {
            "n_epoch": self.n_epoch, "batch_size": self.batch_size, "lr0": self.lr0, "lr_min": self.lr_min,
            "patience": self.patience, "lr_factor": self.lr_factor, "use_scheduler": self.use_scheduler,
            "betas": list(self.betas), "eps": self.eps, "weight_decay": self.weight_decay,
            "losses": list(self.losses),
            "weights": {name: w.weight(name) for name in LOSS_NAMES},
            "n_pred": w.n_pred, "grad_scheme": self.grad_scheme, "clip": self.clip,
            "clip_enabled": self.clip_enabled, "noise_sigma": self.noise_sigma, "noise_mode": self.noise_mode,
            "shuffle": self.shuffle, "checkpoint_every": self.checkpoint_every, "log_every": self.log_every,
            "parallel": self.parallel, "seed": self.seed,
        }


@dataclass
class EpochRecord:
    epoch: int
    losses: Dict[str, float]
    dev_loss: float
    lr: float
    seconds: float


@dataclass
class TrainHistory:
    """
    Per-epoch training records.

    ``initial_dev_loss`` is the dev loss of the untrained network; it appears
    in the metrics table as epoch -1 with zero elapsed seconds. Apart from the
    wall-clock columns, identical runs produce identical tables.
    """
    records: List[EpochRecord] = field(default_factory=list)
    initial_dev_loss: Optional[float] = None
    initial_lr: Optional[float] = None

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: EpochRecord) -> None:
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ValueError(f"epoch {record.epoch} does not follow epoch {self.records[-1].epoch}")
        self.records.append(record)

    @property
    def learning_rates(self) -> List[float]:
        return [r.lr for r in self.records]

    @property
    def dev_losses(self) -> List[float]:
        return [r.dev_loss for r in self.records]

    def dev_reduction_orders(self) -> float:
        """Orders of magnitude between the untrained and the final dev loss."""
        if self.initial_dev_loss is None or not self.records:
            raise ValueError("dev loss reduction needs an initial dev loss and at least one epoch")
        return math.log10(self.initial_dev_loss) - math.log10(self.records[-1].dev_loss)

    def to_dataframe(self, log_floor: float = -12.0) -> pd.DataFrame:
        """Metrics table on a log10 scale; inactive losses are empty."""
        rows = []
        if self.initial_dev_loss is not None:
            row: Dict[str, Any] = {column: np.nan for column in METRIC_COLUMNS.values()}
            row.update(epoch=INITIAL_EPOCH, log10_L_dev=log10_floor(self.initial_dev_loss, log_floor),
                       lr=self.initial_lr, seconds=0.0)
            rows.append(row)
        for r in self.records:
            row = {"epoch": r.epoch}
            for name, column in METRIC_COLUMNS.items():
                row[column] = log10_floor(r.losses[name], log_floor) if name in r.losses else np.nan
            row["log10_L_dev"] = log10_floor(r.dev_loss, log_floor)
            row["lr"] = r.lr
            row["seconds"] = r.seconds
            rows.append(row)
        return pd.DataFrame(rows, columns=METRICS_HEADER)

    def to_csv(self, path: str) -> None:
        self.to_dataframe().to_csv(path, index=False, na_rep="")
        logging.info(f"Wrote training metrics to {path}")


def inject_noise(batch: Batch, sigma: float, rng: np.random.Generator, mode: str = "per_point") -> Batch:
    """
    Add N(0, sigma^2) noise to the network inputs of a batch.

    Targets, controls and collocation times are left untouched.

    Args:
        batch: Clean batch.
        sigma: Noise standard deviation (>= 0).
        rng: Random generator.
        mode: ``per_point`` draws independently for every component of every
            point; ``per_trajectory`` draws one vector per trajectory.
    """
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if mode not in NOISE_MODES:
        raise ValueError(f"Unknown noise mode {mode!r}; expected one of {NOISE_MODES}")
    if sigma == 0.0:
        return batch
    n_b, n_d, dim = batch.states.shape
    shape = (n_b, n_d, dim) if mode == "per_point" else (n_b, 1, dim)
    noise = torch.as_tensor(rng.normal(0.0, sigma, size=shape), dtype=torch.float64)
    return Batch(
        states=batch.states,
        controls=batch.controls,
        colloc_times=batch.colloc_times,
        T=batch.T,
        inputs=batch.states + noise,
    )


def _check_horizon(config: TrainConfig, n_points: int) -> None:
    if any(name in config.losses for name in ("roll", "phy_roll")) and config.weights.n_pred >= n_points:
        raise ConfigError("train.n_pred", f"rollout horizon {config.weights.n_pred} needs more than "
                                          f"{config.weights.n_pred} points per trajectory, dataset has {n_points}")


class Trainer:
    """
    Runs the training protocol for one model.

    Args:
        model_config: Architecture of the network.
        train_config: Optimization settings.
        params: Physical parameters for the physics losses.
        out_dir: When set, checkpoints and metrics are written here.
    """

    def __init__(self, model_config: ModelConfig, train_config: TrainConfig,
                 params: PhysicalParams, out_dir: Optional[str] = None):
        self.model_config = model_config
        self.config = train_config
        self.params = params
        self.out_dir = out_dir
        self.model = init_params(model_config)
        self.optimizer = make_optimizer(self.model, train_config.lr0, train_config.betas,
                                        train_config.eps, train_config.weight_decay)
        self.scheduler = (PlateauScheduler(self.optimizer, train_config.patience,
                                           train_config.lr_factor, train_config.lr_min)
                          if train_config.use_scheduler else None)
        self.rng = np.random.Generator(np.random.PCG64(train_config.seed))
        self.history = TrainHistory()

    def _batch_step(self, batch: Batch, epoch: int, batch_index: int) -> Dict[str, float]:
        cfg = self.config
        if cfg.noise_sigma > 0.0:
            batch = inject_noise(batch, cfg.noise_sigma, self.rng, cfg.noise_mode)

        values: Dict[str, float] = {}
        grads: Dict[str, torch.Tensor] = {}
        try:
            for name in cfg.active_losses:
                evaluate = loss_evaluator(name, self.model, batch, self.params, cfg.weights.n_pred)
                values[name], grads[name] = loss_gradient(self.model, evaluate, name)
            weights = {name: cfg.weights.weight(name) for name in grads}
            combined = combine_gradients(cfg.grad_scheme, grads, weights)
        except NumericalError as e:
            raise NumericalError(str(e), epoch=epoch, batch=batch_index) from e
        if cfg.clip_enabled:
            combined = clip_norm(combined, cfg.clip)
        logger.debug(f"epoch {epoch} batch {batch_index}: "
                     + ", ".join(f"{k}={v:.3e}" for k, v in values.items())
                     + f", |g|={torch.linalg.vector_norm(combined).item():.3e}")

        snapshot = parameters_to_vector(self.model.parameters()).detach().clone()
        adamw_step(self.optimizer, self.model, combined)
        if not torch.isfinite(parameters_to_vector(self.model.parameters())).all():
            with torch.no_grad():
                vector_to_parameters(snapshot, self.model.parameters())
            raise NumericalError("optimizer step produced non-finite parameters", epoch=epoch, batch=batch_index)
        return values

    def _dev_loss(self, dev_batch: Batch) -> float:
        with torch.no_grad():
            return data_loss(self.model, dev_batch).item()

    def _checkpoint(self, name: str, epoch: int) -> None:
        if self.out_dir:
            save_checkpoint(self.model, os.path.join(self.out_dir, name), metadata={"epoch": epoch})

    def fit(self, dataset: Dataset, dev_set: Optional[Dataset] = None) -> Tuple[PINCNetwork, TrainHistory]:
        """
        Train on ``dataset`` for ``n_epoch`` epochs.

        Raises:
            NumericalError: A non-finite loss, gradient or parameter; the last
                finite model is saved as ``model_last_finite.json`` first.
        """
        cfg = self.config
        if cfg.use_scheduler and dev_set is None:
            raise ConfigError("train.use_scheduler", "the plateau scheduler needs a dev set")
        _check_horizon(cfg, dataset.n_steps)
        if self.out_dir:
            ensure_directory_exists(self.out_dir)

        train_batch = Batch.from_dataset(dataset)
        dev_batch = Batch.from_dataset(dev_set) if dev_set is not None else None
        n_traj = len(dataset)
        logger.info(f"Training on {n_traj} trajectories for {cfg.n_epoch} epochs "
                    f"(losses={list(cfg.active_losses)}, scheme={cfg.grad_scheme}, batch={cfg.batch_size})")
        if dev_batch is not None:
            self.history.initial_dev_loss = self._dev_loss(dev_batch)
            self.history.initial_lr = current_lr(self.optimizer)
            logger.info(f"Initial dev loss {self.history.initial_dev_loss:.3e}")

        threads = torch.get_num_threads()
        if not cfg.parallel:
            torch.set_num_threads(1)
        start = time.time()
        try:
            for epoch in range(cfg.n_epoch):
                order = self.rng.permutation(n_traj) if cfg.shuffle else np.arange(n_traj)
                totals = {name: 0.0 for name in cfg.active_losses}
                for batch_index, indices in enumerate(chunker(order, cfg.batch_size)):
                    values = self._batch_step(train_batch.select(indices), epoch, batch_index)
                    for name, value in values.items():
                        totals[name] += value * len(indices)

                dev_loss = self._dev_loss(dev_batch) if dev_batch is not None else float("nan")
                if self.scheduler is not None:
                    self.scheduler.step(dev_loss)
                record = EpochRecord(
                    epoch=epoch,
                    losses={name: total / n_traj for name, total in totals.items()},
                    dev_loss=dev_loss,
                    lr=current_lr(self.optimizer),
                    seconds=time.time() - start,
                )
                self.history.append(record)

                if cfg.log_every and (epoch % cfg.log_every == 0 or epoch == cfg.n_epoch - 1):
                    logger.info(f"Epoch {epoch}: "
                                + ", ".join(f"L_{k}={v:.3e}" for k, v in record.losses.items())
                                + f", L_dev={dev_loss:.3e}, lr={record.lr:.2e}")
                if cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
                    self._checkpoint(f"model_epoch{epoch + 1}.json", epoch)
        except NumericalError:
            logger.error("Training aborted on a non-finite value; saving the last finite model")
            self._checkpoint("model_last_finite.json", len(self.history) - 1)
            self._write_metrics()
            raise
        finally:
            torch.set_num_threads(threads)

        self._checkpoint("model_final.json", cfg.n_epoch - 1)
        self._write_metrics()
        logger.info(f"Training finished in {time.time() - start:.1f}s")
        return self.model, self.history

    def _write_metrics(self) -> None:
        if self.out_dir:
            self.history.to_csv(os.path.join(self.out_dir, "metrics.csv"))


def train(dataset: Dataset, dev_set: Optional[Dataset], model_config: ModelConfig,
          train_config: TrainConfig, params: PhysicalParams,
          out_dir: Optional[str] = None) -> Tuple[PINCNetwork, TrainHistory]:
    """Train a freshly initialized network; see :class:`Trainer`."""
    return Trainer(model_config, train_config, params, out_dir).fit(dataset, dev_set)
