"""
Layered configuration loading.

Resolution order (later wins): built-in defaults < TOML file < environment
(``PINC_<SECTION>__<KEY>``) < CLI overrides < ``PINC_SEED``.
"""

import copy
import json
import logging
import math
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Dict, Optional

import config as settings
from dynamics.params import DEFAULT_PARAMS_FILE
from utils.errors import ConfigError

DEFAULT_CONFIG: Dict[str, Any] = {
    "dynamics": {
        "params_file": DEFAULT_PARAMS_FILE,
    },
    "generation": {
        "n_traj": 400,
        "sample_period": 0.08,
        "n_steps": 66,
        "substeps": 10,
        "input_kind": "ramp",
        "amplitude": 1.0,
        "freq_range": [0.01, 0.2],
        "phase_range": [0.0, 2.0 * math.pi],
        "offset_variance": 0.25,
        "sign_probability": 0.5,
        "n_colloc": 1,
        "colloc_placement": "lhs",
        "ranges": {
            "x_max": 1.0, "y_max": 1.0, "z_max": 1.0, "psi_max": math.pi,
            "u_max": 1.0, "v_max": 0.0, "w_max": 0.1, "r_max": 0.0,
        },
        "seed": 0,
    },
    "model": {
        "n_layers": 4,
        "n_hidden": 32,
        "activation": "adaptive_softplus",
        "layer_norm_every_2nd": True,
        "layer_norm_eps": 1e-5,
        "residual_connection": True,
        "rotate_planar_increments": True,
        "renormalize_yaw_on_rollout": False,
        "seed": 0,
    },
    "train": {
        "n_epoch": 1200,
        "batch_size": 10,
        "lr0": 8e-3,
        "lr_min": 1e-4,
        "patience": 100,
        "lr_factor": 0.5,
        "use_scheduler": True,
        "betas": [0.9, 0.999],
        "eps": 1e-8,
        "weight_decay": 1e-2,
        "losses": ["data", "phy"],
        "weights": {"data": 1.0, "roll": 1.0, "phy": 0.5, "phy_roll": 0.5, "ic": 0.5},
        "n_pred": 10,
        "grad_scheme": "norm",
        "clip": 5.0,
        "clip_enabled": True,
        "noise_sigma": 0.0,
        "noise_mode": "per_point",
        "shuffle": True,
        "checkpoint_every": 0,
        "log_every": 10,
        "parallel": False,
        "seed": 0,
    },
    "eval": {
        "threshold": 0.05,
        "n_pred": 10,
        "log_floor": -12.0,
        "plot_trajectories": 4,
    },
    "logging": {
        "level": "INFO",
        "file": "",
    },
}

# Sections whose keys are not fixed by the defaults.
_OPEN_SECTIONS = {"dynamics"}
_SEEDED_SECTIONS = ("generation", "model", "train")


def load_config(config_path: Optional[str] = None,
                overrides: Optional[Dict[str, Any]] = None,
                env: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
    """
    Load configuration from defaults, a TOML file, the environment and overrides.

    Args:
        config_path: Optional TOML file.
        overrides: Nested dictionary of final overrides (CLI flags).
        env: Environment mapping; defaults to ``os.environ``.

    Returns:
        Fully-resolved configuration dictionary.

    Raises:
        ConfigError: Unknown key, wrong type, unreadable file.
    """
    config = copy.deepcopy(DEFAULT_CONFIG)
    env = os.environ if env is None else env

    if config_path:
        if not os.path.exists(config_path):
            raise ConfigError("config", f"file not found: {config_path}")
        try:
            with open(config_path, "rb") as f:
                file_config = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError("config", f"cannot parse {config_path}: {e}") from e
        _update_dict(config, file_config)
        logging.debug(f"Loaded configuration file {config_path}")

    _override_from_env(config, env)

    if overrides:
        _update_dict(config, overrides)

    seed = env.get("PINC_SEED", settings.PINC_SEED)
    if seed not in (None, ""):
        try:
            seed_value = int(seed)
        except ValueError as e:
            raise ConfigError("PINC_SEED", f"not an integer: {seed!r}") from e
        for section in _SEEDED_SECTIONS:
            config[section]["seed"] = seed_value

    validate_config(config)
    return config


def validate_config(config: Dict[str, Any]) -> None:
    """
    Reject unknown keys and values whose type does not match the defaults.

    Range checks live in the typed dataclasses built from each section.
    """
    for section, values in config.items():
        if section not in DEFAULT_CONFIG:
            raise ConfigError(section, "unknown section")
        if section in _OPEN_SECTIONS:
            continue
        _check_against(values, DEFAULT_CONFIG[section], section)


def _check_against(values: Dict[str, Any], reference: Dict[str, Any], prefix: str) -> None:
    if not isinstance(values, dict):
        raise ConfigError(prefix, "expected a table")
    for key, value in values.items():
        dotted = f"{prefix}.{key}"
        if key not in reference:
            raise ConfigError(dotted, "unknown key")
        expected = reference[key]
        if isinstance(expected, dict):
            _check_against(value, expected, dotted)
        elif isinstance(expected, bool):
            if not isinstance(value, bool):
                raise ConfigError(dotted, f"expected a boolean, got {value!r}")
        elif isinstance(expected, (int, float)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(dotted, f"expected a number, got {value!r}")
            if isinstance(expected, int) and not isinstance(expected, bool) and not float(value).is_integer():
                raise ConfigError(dotted, f"expected an integer, got {value!r}")
        elif isinstance(expected, list):
            if not isinstance(value, list):
                raise ConfigError(dotted, f"expected a list, got {value!r}")
        elif isinstance(expected, str):
            if not isinstance(value, str):
                raise ConfigError(dotted, f"expected a string, got {value!r}")


def _update_dict(d, u):
    """
    Recursively update a dictionary.

    Parameters:
    -----------
    d : dict
        Dictionary to update
    u : dict
        Dictionary with updates

    Returns:
    --------
    dict
        Updated dictionary
    """
    for k, v in u.items():
        if isinstance(v, dict) and k in d and isinstance(d[k], dict):
            d[k] = _update_dict(d[k], v)
        else:
            d[k] = v
    return d


def _override_from_env(config, env, prefix="PINC"):
    """
    Override configuration with environment variables of the form
    ``PINC_SECTION__KEY`` (double underscore separates nesting levels).

    Parameters:
    -----------
    config : dict
        Configuration dictionary to update
    env : mapping
        Environment variables
    prefix : str, optional
        Prefix for environment variables
    """
    for key, value in env.items():
        if not key.startswith(prefix + "_") or "__" not in key:
            continue
        parts = key[len(prefix) + 1:].lower().split("__")

        current = config
        for part in parts[:-1]:
            if part not in current:
                current[part] = {}
            current = current[part]

        current[parts[-1]] = _parse_env_value(value)


def _parse_env_value(value):
    """
    Parse environment variable values to appropriate types.

    Parameters:
    -----------
    value : str
        Environment variable value

    Returns:
    --------
    Any
        Parsed value
    """
    # JSON covers numbers, lists and true/false
    try:
        return json.loads(value)
    except json.JSONDecodeError:
        pass

    if value.lower() == "true":
        return True
    elif value.lower() == "false":
        return False

    return value

