"""
Physical parameters of the 4-DOF vehicle model.

Parameter files are flat TOML (``name = value`` per line) or a TOML table
``[params]`` with exactly the field names of :class:`PhysicalParams`. The
quadratic drag coefficients are named ``X_uu``, ``Y_vv``, ``Z_ww``, ``N_rr``;
the alternative spelling ``X_uc``/``Y_vc``/``Z_wc``/``N_rc`` is accepted as an alias.
"""

import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Optional

from utils.errors import ConfigError

DEFAULT_PARAMS_FILE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "bluerov2_default.toml")

QUADRATIC_DRAG_ALIASES = {"X_uc": "X_uu", "Y_vc": "Y_vv", "Z_wc": "Z_ww", "N_rc": "N_rr"}


@dataclass(frozen=True)
class PhysicalParams:
    """Mass, inertia, restoring, added-mass and drag coefficients."""

    m: float
    I_zz: float
    g: float
    rho_water: float
    V_sub: float
    X_du: float
    Y_dv: float
    Z_dw: float
    N_dr: float
    X_u: float
    Y_v: float
    Z_w: float
    N_r: float
    X_uu: float
    Y_vv: float
    Z_ww: float
    N_rr: float

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "PhysicalParams":
        """
        Build parameters from a mapping, resolving aliases.

        Raises:
            ConfigError: Unknown, missing or non-numeric fields, or invariant violations.
        """
        names = {f.name for f in fields(cls)}
        resolved: Dict[str, float] = {}
        for key, value in values.items():
            name = QUADRATIC_DRAG_ALIASES.get(key, key)
            if name not in names:
                raise ConfigError(f"dynamics.{key}", "unknown physical parameter")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"dynamics.{key}", f"expected a number, got {value!r}")
            resolved[name] = float(value)
        missing = sorted(names - resolved.keys())
        if missing:
            raise ConfigError("dynamics", f"missing parameters: {', '.join(missing)}")
        params = cls(**resolved)
        params.validate()
        return params

    def validate(self) -> None:
        """Check positive effective inertia and dissipative (non-positive) drag."""
        effective = {
            "m - X_du": self.m - self.X_du,
            "m - Y_dv": self.m - self.Y_dv,
            "m - Z_dw": self.m - self.Z_dw,
            "I_zz - N_dr": self.I_zz - self.N_dr,
        }
        for label, value in effective.items():
            if value <= 0.0:
                raise ConfigError("dynamics", f"{label} must be positive, got {value}")
        for name in ("X_u", "Y_v", "Z_w", "N_r", "X_uu", "Y_vv", "Z_ww", "N_rr"):
            if getattr(self, name) > 0.0:
                raise ConfigError(f"dynamics.{name}", "drag coefficients must be <= 0")
        for name in ("g", "rho_water", "V_sub"):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"dynamics.{name}", "must be >= 0")

    def with_overrides(self, **overrides: float) -> "PhysicalParams":
        params = replace(self, **{QUADRATIC_DRAG_ALIASES.get(k, k): float(v) for k, v in overrides.items()})
        params.validate()
        return params

    def neutrally_buoyant(self) -> "PhysicalParams":
        """Copy with V_sub chosen so that weight and buoyancy cancel."""
        return self.with_overrides(V_sub=self.m / self.rho_water)

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def load_params(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> PhysicalParams:
    """
    Load physical parameters from a parameter file and apply overrides.

    Args:
        path: Parameter file; the shipped BlueROV2-class defaults when omitted.
        overrides: Field values replacing those of the file.

    Returns:
        Validated PhysicalParams.
    """
    path = path or DEFAULT_PARAMS_FILE
    if not os.path.exists(path):
        raise ConfigError("dynamics.params_file", f"file not found: {path}")
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError("dynamics.params_file", f"cannot parse {path}: {e}") from e
    values = dict(raw.get("params", raw))
    if overrides:
        values.update(overrides)
    logging.debug(f"Loaded physical parameters from {path}")
    return PhysicalParams.from_dict(values)


def params_from_config(section: Dict[str, Any]) -> PhysicalParams:
    """Resolve the ``[dynamics]`` config section: optional params_file plus field overrides."""
    section = dict(section)
    path = section.pop("params_file", None) or None
    return load_params(path, overrides=section)
