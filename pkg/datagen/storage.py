"""
Dataset files: one CSV per trajectory, a collocation sidecar per trajectory and
a JSON manifest.
"""

import logging
import os
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from datagen.generator import Dataset, Trajectory
from utils.errors import DatasetError
from utils.helpers import ensure_empty_directory, get_file_hash, load_json, save_json

TRAJECTORY_COLUMNS = ["t", "x", "y", "z", "psi", "u", "v", "w", "r", "Fx", "Fy", "Fz", "Mz"]
COLLOC_COLUMNS = ["interval_index", "tau"]
MANIFEST_FILE = "manifest.json"
FLOAT_FORMAT = "%.17g"


def _trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    controls = np.full((traj.n_steps, 4), np.nan)
    controls[:-1] = traj.controls
    data = np.column_stack((traj.times, traj.states, controls))
    return pd.DataFrame(data, columns=TRAJECTORY_COLUMNS)


def _colloc_frame(traj: Trajectory) -> pd.DataFrame:
    n_intervals, n_colloc = traj.colloc_times.shape
    return pd.DataFrame({
        "interval_index": np.repeat(np.arange(n_intervals), n_colloc),
        "tau": traj.colloc_times.reshape(-1),
    })


def write_dataset(dataset: Dataset, out_dir: str, force: bool = False) -> Dict[str, Any]:
    """
    Write a dataset to ``out_dir``.

    Args:
        dataset: Dataset to write.
        out_dir: Target directory; must be empty unless ``force`` is set.
        force: Allow writing into a non-empty directory.

    Returns:
        The manifest as written, including the file list and file hashes.

    Raises:
        FileExistsError: ``out_dir`` is not empty and force is not set.
    """
    ensure_empty_directory(out_dir, force=force)
    files: List[Dict[str, str]] = []
    for i, traj in enumerate(dataset.trajectories):
        traj_name = f"traj_{i:04d}.csv"
        colloc_name = f"colloc_{i:04d}.csv"
        traj_path = os.path.join(out_dir, traj_name)
        colloc_path = os.path.join(out_dir, colloc_name)
        _trajectory_frame(traj).to_csv(traj_path, index=False, float_format=FLOAT_FORMAT, na_rep="")
        _colloc_frame(traj).to_csv(colloc_path, index=False, float_format=FLOAT_FORMAT)
        files.append({
            "trajectory": traj_name,
            "colloc": colloc_name,
            "trajectory_sha256": get_file_hash(traj_path),
            "colloc_sha256": get_file_hash(colloc_path),
        })

    manifest = {**dataset.manifest, "files": files}
    save_json(manifest, os.path.join(out_dir, MANIFEST_FILE))
    logging.info(f"Wrote {len(files)} trajectories to {out_dir}")
    return manifest


def _read_trajectory(data_dir: str, entry: Dict[str, str], T: float) -> Trajectory:
    traj_path = os.path.join(data_dir, entry["trajectory"])
    colloc_path = os.path.join(data_dir, entry["colloc"])
    for path in (traj_path, colloc_path):
        if not os.path.exists(path):
            raise DatasetError(f"missing dataset file {path}")

    frame = pd.read_csv(traj_path, float_precision="round_trip")
    if list(frame.columns) != TRAJECTORY_COLUMNS:
        raise DatasetError(f"{traj_path}: expected header {','.join(TRAJECTORY_COLUMNS)}")
    colloc = pd.read_csv(colloc_path, float_precision="round_trip")
    if list(colloc.columns) != COLLOC_COLUMNS:
        raise DatasetError(f"{colloc_path}: expected header {','.join(COLLOC_COLUMNS)}")

    states = frame[TRAJECTORY_COLUMNS[1:9]].to_numpy(dtype=np.float64)
    controls = frame[TRAJECTORY_COLUMNS[9:]].to_numpy(dtype=np.float64)[:-1]
    if not np.isfinite(states).all() or not np.isfinite(controls).all():
        raise DatasetError(f"{traj_path}: non-finite or missing values")

    n_intervals = len(frame) - 1
    counts = colloc.groupby("interval_index").size()
    if len(counts) != n_intervals or counts.nunique() != 1:
        raise DatasetError(f"{colloc_path}: expected the same number of points for each of {n_intervals} intervals")
    colloc = colloc.sort_values("interval_index", kind="stable")
    colloc_times = colloc["tau"].to_numpy(dtype=np.float64).reshape(n_intervals, -1)
    return Trajectory(T=T, states=states, controls=controls, colloc_times=colloc_times)


def read_dataset(data_dir: str) -> Dataset:
    """
    Read a dataset written by :func:`write_dataset`.

    Raises:
        DatasetError: Missing manifest or files, malformed CSVs, inconsistent trajectories.
    """
    manifest_path = os.path.join(data_dir, MANIFEST_FILE)
    if not os.path.exists(manifest_path):
        raise DatasetError(f"no {MANIFEST_FILE} in {data_dir}")
    try:
        manifest = load_json(manifest_path)
    except ValueError as e:
        raise DatasetError(f"cannot parse {manifest_path}: {e}") from e

    try:
        T = float(manifest["sample_period"])
        entries = manifest["files"]
    except (KeyError, TypeError) as e:
        raise DatasetError(f"{manifest_path}: missing field {e}") from e
    if not entries:
        raise DatasetError(f"{manifest_path}: empty file list")

    trajectories = [_read_trajectory(data_dir, entry, T) for entry in entries]
    dataset = Dataset(trajectories=trajectories, manifest={k: v for k, v in manifest.items() if k != "files"})
    if "n_steps" in manifest and dataset.n_steps != manifest["n_steps"]:
        raise DatasetError(f"{manifest_path}: n_steps {manifest['n_steps']} does not match files ({dataset.n_steps})")
    logging.info(f"Loaded {len(dataset)} trajectories from {data_dir}")
    return dataset
