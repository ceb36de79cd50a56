"""
Report Generator for evaluation outputs and figures.

This module writes:
- The evaluation report JSON
- Per-trajectory rollout position errors and trajectory-vs-prediction CSVs
- Training curves, rollout plots and grid summaries (PNG)
"""

import logging
import os
from typing import Dict, List, Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import seaborn as sns
import torch.nn as nn

from datagen.generator import Dataset
from datagen.sampling import from_net_state
from evaluation.metrics import position_errors, rollout_predictions
from evaluation.suite import EvalReport
from utils.helpers import ensure_directory_exists, handle_exceptions, save_json

STATE_COLUMNS = ["x", "y", "z", "psi"]
VPT_LABELS = {"VPT1": "dev", "VPT2": "interp", "VPT3": "extrap"}


class ReportGenerator:
    """Class for writing evaluation reports and visualizations."""

    def __init__(self, output_dir: str):
        """
        Initialize the report generator.

        Args:
            output_dir: Directory to save generated files.
        """
        self.output_dir = output_dir
        ensure_directory_exists(self.output_dir)

        sns.set_style("whitegrid")
        plt.rcParams["figure.figsize"] = (12, 8)

        logging.debug(f"Initialized ReportGenerator with output directory: {self.output_dir}")

    def _path(self, filename: str) -> str:
        return os.path.join(self.output_dir, filename)

    @handle_exceptions
    def write_report(self, report: EvalReport, filename: str = "report.json") -> str:
        """
        Write an evaluation report as JSON.

        Returns:
            Path to the report file.
        """
        path = self._path(filename)
        save_json(report.to_dict(), path)
        logging.info(f"Wrote evaluation report: {path}")
        return path

    def position_error_frame(self, model: nn.Module, sets: Dict[str, Dataset]) -> pd.DataFrame:
        """Long table of rollout position errors: split, traj, step, t, error_m."""
        frames = []
        for split, dataset in sets.items():
            errors = position_errors(model, dataset).numpy()
            n_traj, horizon = errors.shape
            steps = np.arange(1, horizon + 1)
            frames.append(pd.DataFrame({
                "split": split,
                "traj": np.repeat(np.arange(n_traj), horizon),
                "step": np.tile(steps, n_traj),
                "t": np.tile(steps * dataset.T, n_traj),
                "error_m": errors.reshape(-1),
            }))
        return pd.concat(frames, ignore_index=True)

    @handle_exceptions
    def write_position_errors(self, model: nn.Module, sets: Dict[str, Dataset],
                              filename: str = "position_errors.csv") -> str:
        """
        Write per-trajectory rollout position errors over time.

        Returns:
            Path to the CSV file.
        """
        path = self._path(filename)
        frame = self.position_error_frame(model, sets)
        frame.to_csv(path, index=False, float_format="%.10g")
        logging.info(f"Wrote position errors for {frame['traj'].nunique()} trajectories per split: {path}")
        return path

    def rollout_frame(self, model: nn.Module, dataset: Dataset, index: int) -> pd.DataFrame:
        """Ground truth and full-rollout prediction of one trajectory (x, y, z, psi)."""
        tensors = dataset.to_tensors([index])
        states = tensors["states"]
        pred = from_net_state(rollout_predictions(model, states, tensors["controls"], dataset.T))[0].numpy()
        truth = states[0].numpy()
        frame = pd.DataFrame({"t": np.arange(dataset.n_steps) * dataset.T})
        for j, name in enumerate(STATE_COLUMNS):
            frame[name] = truth[:, j]
            frame[f"{name}_pred"] = np.concatenate(([truth[0, j]], pred[:, j]))
        return frame

    @handle_exceptions
    def write_rollouts(self, model: nn.Module, dataset: Dataset, n_traj: int,
                       prefix: str = "rollout") -> List[str]:
        """
        Write trajectory-vs-prediction CSVs for the first ``n_traj`` trajectories.

        Returns:
            Paths of the written files.
        """
        paths = []
        for i in range(min(n_traj, len(dataset))):
            path = self._path(f"{prefix}_{i:04d}.csv")
            self.rollout_frame(model, dataset, i).to_csv(path, index=False, float_format="%.10g")
            paths.append(path)
        logging.info(f"Wrote {len(paths)} rollout comparisons to {self.output_dir}")
        return paths

    @handle_exceptions
    def plot_training_curves(self, metrics: pd.DataFrame, filename: str = "training_curves.png") -> Optional[str]:
        """
        Plot log10 losses and the learning rate against the epoch.

        Args:
            metrics: Metrics table as written by the trainer.

        Returns:
            Path to the figure, or None when there is nothing to plot.
        """
        if metrics.empty:
            logging.warning("No training metrics to plot")
            return None
        loss_columns = [c for c in metrics.columns if c.startswith("log10_") and metrics[c].notna().any()]
        long = metrics.melt(id_vars="epoch", value_vars=loss_columns, var_name="loss", value_name="log10")

        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(12, 10), sharex=True)
        sns.lineplot(data=long, x="epoch", y="log10", hue="loss", ax=ax1)
        ax1.set_title("Training losses")
        ax1.set_ylabel("log10 loss")

        ax2.plot(metrics["epoch"], metrics["lr"], "k-")
        ax2.set_yscale("log")
        ax2.set_title("Learning rate")
        ax2.set_xlabel("Epoch")
        ax2.set_ylabel("lr")

        plt.tight_layout()
        path = self._path(filename)
        plt.savefig(path, dpi=100)
        plt.close(fig)
        logging.info(f"Generated training curves: {path}")
        return path

    @handle_exceptions
    def plot_rollouts(self, model: nn.Module, dataset: Dataset, n_traj: int,
                      filename: str = "rollouts.png") -> Optional[str]:
        """
        Plot planar ground-truth paths against full rollouts.

        Returns:
            Path to the figure, or None when n_traj is 0.
        """
        n_traj = min(n_traj, len(dataset))
        if n_traj == 0:
            return None
        fig, axes = plt.subplots(1, n_traj, figsize=(5 * n_traj, 5), squeeze=False)
        for i, ax in enumerate(axes[0]):
            frame = self.rollout_frame(model, dataset, i)
            ax.plot(frame["x"], frame["y"], "b-", label="Ground truth")
            ax.plot(frame["x_pred"], frame["y_pred"], "r--", label="Prediction")
            ax.plot(frame["x"].iloc[0], frame["y"].iloc[0], "ko")
            ax.set_title(f"Trajectory {i}")
            ax.set_xlabel("x [m]")
            ax.set_ylabel("y [m]")
            ax.axis("equal")
            ax.legend()
        plt.tight_layout()
        path = self._path(filename)
        plt.savefig(path, dpi=100)
        plt.close(fig)
        logging.info(f"Generated rollout plot: {path}")
        return path

    @handle_exceptions
    def plot_position_errors(self, errors: pd.DataFrame, threshold: float,
                             filename: str = "position_errors.png") -> Optional[str]:
        """Mean rollout position error over time per split, with the VPT threshold."""
        if errors.empty:
            return None
        fig, ax = plt.subplots()
        sns.lineplot(data=errors, x="t", y="error_m", hue="split", errorbar=("pi", 50), ax=ax)
        ax.axhline(threshold, color="k", linestyle=":", label="threshold")
        ax.set_yscale("log")
        ax.set_xlabel("Time [s]")
        ax.set_ylabel("Position error [m]")
        ax.legend()
        plt.tight_layout()
        path = self._path(filename)
        plt.savefig(path, dpi=100)
        plt.close(fig)
        logging.info(f"Generated position error plot: {path}")
        return path

    @handle_exceptions
    def plot_grid_summary(self, summary: pd.DataFrame, filename: str = "grid_summary.png") -> Optional[str]:
        """
        Bar charts of L1 and VPT1-VPT3 per grid cell.

        Args:
            summary: Grid summary with a ``cell`` column and L/VPT columns.
        """
        done = summary[summary["status"] == "ok"] if "status" in summary else summary
        if done.empty:
            logging.warning("No successful grid cells to plot")
            return None
        vpt = done.melt(id_vars="cell", value_vars=[f"{k}_mean_s" for k in VPT_LABELS],
                        var_name="set", value_name="VPT_s")
        vpt["set"] = vpt["set"].str.replace("_mean_s", "").map(VPT_LABELS)

        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(12, 10))
        sns.barplot(data=done, x="cell", y="L1", color="steelblue", ax=ax1)
        ax1.set_title("Dev one-step loss (log10)")
        ax1.tick_params(axis="x", rotation=45)
        sns.barplot(data=vpt, x="cell", y="VPT_s", hue="set", ax=ax2)
        ax2.set_title("Valid prediction time")
        ax2.set_ylabel("VPT [s]")
        ax2.tick_params(axis="x", rotation=45)
        plt.tight_layout()
        path = self._path(filename)
        plt.savefig(path, dpi=100)
        plt.close(fig)
        logging.info(f"Generated grid summary plot: {path}")
        return path
