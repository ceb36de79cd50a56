"""
Main entry point for the PINC toolkit.

Commands:
1. generate  - simulate a dataset (or the dev/interp/extrap evaluation sets)
2. train     - train a PINC network on a dataset with a dev set for scheduling
3. eval      - evaluate a checkpoint on the dev/interp/extrap sets
4. grid      - run an experiment grid with shared datasets and a run registry
5. plot-data - write trajectory-vs-prediction CSVs and plots for a dataset

Exit codes: 0 success, 1 user error (config, dataset, checkpoint, output dir),
2 numerical failure.
"""

import argparse
import copy
import itertools
import logging
import os
import sys
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

import config as settings
from database.run_store import RunStore
from datagen import (
    Dataset, GenerationConfig, generate_dataset, read_dataset, resample_collocation, write_dataset,
)
from dynamics import PhysicalParams, params_from_config
from evaluation.suite import EVAL_SPLITS, EvalConfig, build_eval_sets, full_report
from model import ModelConfig, load_checkpoint
from reporting.report_generator import ReportGenerator
from trainer import TrainConfig, train
from utils.config_loader import load_config
from utils.errors import CheckpointError, ConfigError, DatasetError, NumericalError
from utils.helpers import ensure_directory_exists, ensure_empty_directory, save_json, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USER_ERROR, EXIT_NUMERICAL = 0, 1, 2
USER_ERRORS = (ConfigError, DatasetError, CheckpointError, FileExistsError)


class _ArgumentParser(argparse.ArgumentParser):
    """Argument errors are user errors (exit code 1)."""

    def error(self, message):
        raise ConfigError("cli", message)


def _set_nested(d: Dict[str, Any], dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    for key in keys[:-1]:
        d = d.setdefault(key, {})
    d[keys[-1]] = value


def _flag_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Config overrides from the training flags (only flags that were given)."""
    overrides: Dict[str, Any] = {}
    if getattr(args, "losses", None):
        _set_nested(overrides, "train.losses", [s.strip() for s in args.losses.split(",") if s.strip()])
    if getattr(args, "grad", None):
        _set_nested(overrides, "train.grad_scheme", args.grad)
    if getattr(args, "batch", None) is not None:
        _set_nested(overrides, "train.batch_size", args.batch)
    if getattr(args, "epochs", None) is not None:
        _set_nested(overrides, "train.n_epoch", args.epochs)
    if getattr(args, "colloc", None) is not None:
        _set_nested(overrides, "generation.n_colloc", args.colloc)
    if getattr(args, "noise_sigma", None) is not None:
        _set_nested(overrides, "train.noise_sigma", args.noise_sigma)
    if getattr(args, "ablate_residual", False):
        _set_nested(overrides, "model.residual_connection", False)
    if getattr(args, "no_scheduler", False):
        _set_nested(overrides, "train.use_scheduler", False)
    if getattr(args, "parallel", False):
        _set_nested(overrides, "train.parallel", True)
    if getattr(args, "seed", None) is not None:
        for section in ("generation", "model", "train"):
            _set_nested(overrides, f"{section}.seed", args.seed)
    return overrides


def _resolve_config(args: argparse.Namespace, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    overrides = _flag_overrides(args)
    if extra:
        overrides = _merge(overrides, extra)
    cfg = load_config(getattr(args, "config", None), overrides=overrides)
    setup_logging(cfg["logging"]["file"] or settings.LOG_FILE or None, cfg["logging"]["level"])
    return cfg


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _check_compatible(train_set: Dataset, dev_set: Dataset) -> None:
    if (train_set.T, train_set.n_steps) != (dev_set.T, dev_set.n_steps):
        raise DatasetError(
            f"training set (T={train_set.T}, N_steps={train_set.n_steps}) and dev set "
            f"(T={dev_set.T}, N_steps={dev_set.n_steps}) are not compatible"
        )


def _read_eval_sets(args: argparse.Namespace) -> Dict[str, Dataset]:
    sets = {}
    for split in EVAL_SPLITS:
        path = getattr(args, split, None) or (os.path.join(args.sets, split) if args.sets else None)
        if path is None:
            raise ConfigError("cli", f"no directory for the {split} set (use --sets or --{split})")
        sets[split] = read_dataset(path)
    return sets


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    gen_config = GenerationConfig.from_dict(cfg["generation"])
    params = params_from_config(cfg["dynamics"])
    ensure_empty_directory(args.out, force=args.force)

    if args.eval_sets:
        sets = build_eval_sets(gen_config, params, jobs=args.jobs)
        for split, dataset in sets.items():
            write_dataset(dataset, os.path.join(args.out, split), force=args.force)
    else:
        write_dataset(generate_dataset(gen_config, params, jobs=args.jobs), args.out, force=True)
    save_json(cfg, os.path.join(args.out, "generate_config_echo.json"))
    return EXIT_OK


def _train_run(cfg: Dict[str, Any], train_set: Dataset, dev_set: Dataset, params: PhysicalParams,
               out_dir: str) -> None:
    """Train one model and write checkpoint, metrics and training curves into out_dir."""
    model_config = ModelConfig.from_dict(cfg["model"])
    train_config = TrainConfig.from_dict(cfg["train"])
    gen = cfg["generation"]
    if gen["n_colloc"] != train_set.n_colloc or gen["colloc_placement"] != "lhs":
        train_set = resample_collocation(train_set, gen["n_colloc"], train_config.seed, gen["colloc_placement"])
    save_json(cfg, os.path.join(out_dir, "train_config_echo.json"))

    reporter = ReportGenerator(out_dir)
    try:
        _, history = train(train_set, dev_set, model_config, train_config, params, out_dir=out_dir)
    finally:
        metrics_path = os.path.join(out_dir, "metrics.csv")
        if os.path.exists(metrics_path):
            reporter.plot_training_curves(pd.read_csv(metrics_path))


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    params = params_from_config(cfg["dynamics"])
    train_set = read_dataset(args.data)
    dev_set = read_dataset(args.dev)
    _check_compatible(train_set, dev_set)
    ensure_empty_directory(args.out, force=args.force)
    _train_run(cfg, train_set, dev_set, params, args.out)
    return EXIT_OK


def _evaluate(model, sets: Dict[str, Dataset], params: PhysicalParams, eval_config: EvalConfig,
              cfg: Dict[str, Any], out_dir: str, report_name: str = "report.json"):
    reporter = ReportGenerator(out_dir)
    report = full_report(model, sets, params, eval_config, config_echo=cfg)
    reporter.write_report(report, report_name)
    reporter.write_position_errors(model, sets)
    errors = reporter.position_error_frame(model, sets)
    reporter.plot_position_errors(errors, eval_config.threshold)
    reporter.plot_rollouts(model, sets["dev"], eval_config.plot_trajectories)
    return report


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    params = params_from_config(cfg["dynamics"])
    expected = ModelConfig.from_dict(cfg["model"]) if args.config else None
    model = load_checkpoint(args.checkpoint, expected_config=expected)
    sets = _read_eval_sets(args)

    report_dir = os.path.dirname(os.path.abspath(args.report))
    ensure_directory_exists(report_dir)
    save_json(cfg, os.path.join(report_dir, "eval_config_echo.json"))
    _evaluate(model, sets, params, EvalConfig.from_dict(cfg["eval"]), cfg, report_dir,
              os.path.basename(args.report))
    return EXIT_OK


def cmd_plot_data(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    model = load_checkpoint(args.checkpoint)
    dataset = read_dataset(args.data)
    ensure_directory_exists(args.out)
    save_json(cfg, os.path.join(args.out, "plot_config_echo.json"))
    n_traj = args.n if args.n is not None else cfg["eval"]["plot_trajectories"]

    reporter = ReportGenerator(args.out)
    reporter.write_rollouts(model, dataset, n_traj)
    reporter.plot_rollouts(model, dataset, n_traj)
    errors = reporter.position_error_frame(model, {"data": dataset})
    reporter.plot_position_errors(errors, cfg["eval"]["threshold"])
    return EXIT_OK


# --- Experiment grid ---

def _resolve_path(path: str, grid_dir: str) -> str:
    for candidate in (os.path.join(grid_dir, path), os.path.join(settings.PRESET_DIR, path), path):
        if os.path.exists(candidate):
            return candidate
    raise ConfigError("grid", f"file not found: {path}")


def expand_grid(grid: Dict[str, Any]) -> List[Tuple[str, Dict[str, Any]]]:
    """
    Grid cells as (name, overrides) pairs.

    ``[[cells]]`` entries give explicit overrides; ``[[sweeps]]`` entries give
    dotted-key axes whose Cartesian product becomes one cell per combination.
    """
    cells: List[Tuple[str, Dict[str, Any]]] = []
    for cell in grid.get("cells", []):
        if "name" not in cell:
            raise ConfigError("grid.cells", "every cell needs a name")
        cells.append((cell["name"], cell.get("overrides", {})))
    for sweep in grid.get("sweeps", []):
        axes = sweep.get("axes", {})
        if not axes:
            raise ConfigError("grid.sweeps", "a sweep needs at least one axis")
        base = sweep.get("overrides", {})
        keys = list(axes)
        for values in itertools.product(*(axes[k] for k in keys)):
            overrides = copy.deepcopy(base)
            parts = []
            for key, value in zip(keys, values):
                _set_nested(overrides, key, value)
                label = "-".join(map(str, value)) if isinstance(value, list) else str(value)
                parts.append(f"{key.split('.')[-1]}={label}")
            cells.append((f"{sweep.get('name', 'sweep')}_" + "_".join(parts), overrides))
    names = [name for name, _ in cells]
    if len(set(names)) != len(names):
        raise ConfigError("grid", "cell names must be unique")
    return cells


def _run_cell(name: str, cfg: Dict[str, Any], data_dir: str, sets_dir: str, out_dir: str) -> Dict[str, Any]:
    """Train and evaluate one grid cell; never raises."""
    start = time.time()
    try:
        params = params_from_config(cfg["dynamics"])
        train_set = read_dataset(data_dir)
        sets = {split: read_dataset(os.path.join(sets_dir, split)) for split in EVAL_SPLITS}
        ensure_directory_exists(out_dir)
        _train_run(cfg, train_set, sets["dev"], params, out_dir)
        model = load_checkpoint(os.path.join(out_dir, "model_final.json"))
        report = _evaluate(model, sets, params, EvalConfig.from_dict(cfg["eval"]), cfg, out_dir)
        return {"cell": name, "status": "ok", "seconds": time.time() - start, "report": report, "error": None}
    except Exception as e:
        logging.warning(f"Grid cell '{name}' failed: {e}")
        return {"cell": name, "status": "failed", "seconds": time.time() - start, "report": None, "error": str(e)}


def cmd_grid(args: argparse.Namespace) -> int:
    try:
        with open(args.grid, "rb") as f:
            grid = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as e:
        raise ConfigError("grid", f"cannot read {args.grid}: {e}") from e
    grid_dir = os.path.dirname(os.path.abspath(args.grid))
    if "train_config" not in grid or "eval_config" not in grid:
        raise ConfigError("grid", "grid file needs train_config and eval_config")
    cells = expand_grid(grid)

    ensure_empty_directory(args.out, force=args.force)
    args.config = _resolve_path(grid["train_config"], grid_dir)
    base_cfg = _resolve_config(args, extra=grid.get("overrides", {}))
    params = params_from_config(base_cfg["dynamics"])

    # Shared datasets
    data_dir = os.path.join(args.out, "data", "train")
    sets_dir = os.path.join(args.out, "data", "sets")
    train_gen = GenerationConfig.from_dict(base_cfg["generation"])
    write_dataset(generate_dataset(train_gen, params, jobs=args.jobs), data_dir, force=args.force)
    eval_cfg = load_config(_resolve_path(grid["eval_config"], grid_dir))
    eval_gen = GenerationConfig.from_dict(eval_cfg["generation"])
    for split, dataset in build_eval_sets(eval_gen, params, jobs=args.jobs).items():
        write_dataset(dataset, os.path.join(sets_dir, split), force=args.force)
    save_json(base_cfg, os.path.join(args.out, "grid_config_echo.json"))

    jobs = []
    for name, overrides in cells:
        try:
            cell_cfg = load_config(args.config, overrides=_merge(_merge(grid.get("overrides", {}), overrides),
                                                                 _flag_overrides(args)))
        except ConfigError as e:
            jobs.append((name, None, str(e)))
            continue
        jobs.append((name, cell_cfg, None))

    store = RunStore(os.path.join(args.out, "runs.sqlite"))
    runnable = [(name, cfg) for name, cfg, error in jobs if error is None]
    for name, cfg, error in jobs:
        if error is not None:
            logging.warning(f"Grid cell '{name}' has an invalid config: {error}")
            store.record_run(name, "failed", 0.0, overrides=dict(cells)[name], error=error)

    run_args = [(name, cfg, data_dir, sets_dir, os.path.join(args.out, "cells", name)) for name, cfg in runnable]
    logger.info(f"Running {len(run_args)} grid cells ({'parallel' if args.jobs > 1 else 'serial'})")
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_cell, *zip(*run_args))) if run_args else []
    else:
        results = [_run_cell(*a) for a in run_args]

    for result in results:
        store.record_run(result["cell"], result["status"], result["seconds"],
                         overrides=dict(cells)[result["cell"]], report=result["report"], error=result["error"])

    summary = store.to_dataframe()
    summary.to_csv(os.path.join(args.out, "grid_summary.csv"), index=False)
    ReportGenerator(args.out).plot_grid_summary(summary)
    failed = int((summary["status"] != "ok").sum())
    logger.info(f"Grid finished: {len(summary) - failed} ok, {failed} failed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="pinc", description="PINC surrogate models for a 4-DOF underwater vehicle")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def add_common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="TOML config or preset file")
        p.add_argument("--seed", type=int, help="Seed for generation, model init and training")

    def add_training_flags(p):
        p.add_argument("--losses", help="Comma-separated active losses (data,phy,ic,roll,phy_roll)")
        p.add_argument("--grad", choices=["sum", "config", "norm"], help="Gradient combination scheme")
        p.add_argument("--batch", type=int, help="Trajectories per batch")
        p.add_argument("--epochs", type=int, help="Number of epochs")
        p.add_argument("--colloc", type=int, help="Collocation points per interval")
        p.add_argument("--noise-sigma", type=float, help="Std of Gaussian noise on network inputs")
        p.add_argument("--ablate-residual", action="store_true", help="Disable the residual connection")
        p.add_argument("--no-scheduler", action="store_true", help="Keep the learning rate constant")
        p.add_argument("--parallel", action="store_true", help="Allow multi-threaded (non bit-exact) training")

    p = sub.add_parser("generate", help="Generate a dataset")
    add_common(p, config_required=True)
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--eval-sets", action="store_true", help="Write dev/interp/extrap sets into OUT/<split>")
    p.add_argument("--jobs", type=int, default=settings.PARALLEL_WORKERS, help="Worker processes")
    p.add_argument("--force", action="store_true", help="Write into a non-empty output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="Train a PINC network")
    add_common(p)
    add_training_flags(p)
    p.add_argument("--data", required=True, help="Training dataset directory")
    p.add_argument("--dev", required=True, help="Dev dataset directory")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--force", action="store_true", help="Write into a non-empty output directory")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Evaluate a checkpoint")
    add_common(p)
    p.add_argument("--checkpoint", required=True, help="Checkpoint JSON")
    p.add_argument("--sets", help="Directory holding dev/, interp/ and extrap/")
    for split in EVAL_SPLITS:
        p.add_argument(f"--{split}", help=f"{split} dataset directory (overrides --sets)")
    p.add_argument("--report", required=True, help="Report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="Run an experiment grid")
    add_common(p)
    add_training_flags(p)
    p.add_argument("--grid", required=True, help="Grid TOML file")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--jobs", type=int, default=settings.PARALLEL_WORKERS, help="Parallel grid cells")
    p.add_argument("--force", action="store_true", help="Write into a non-empty output directory")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("plot-data", help="Trajectory-vs-prediction CSVs and plots")
    add_common(p)
    p.add_argument("--checkpoint", required=True, help="Checkpoint JSON")
    p.add_argument("--data", required=True, help="Dataset directory")
    p.add_argument("--out", required=True, help="Output directory")
    p.add_argument("--n", type=int, help="Number of trajectories")
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main function: parse arguments, run the command and map errors to exit codes."""
    setup_logging(settings.LOG_FILE or None, settings.LOG_LEVEL)
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except USER_ERRORS as e:
        logging.error(f"{type(e).__name__}: {e}")
        return EXIT_USER_ERROR
    except NumericalError as e:
        logging.error(f"NumericalError: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
