"""Physical constants of the planar hybrid cable robot and config loading.

Config documents are JSON objects whose keys are ``RobotParams`` field
names. Every key is optional; missing keys take the built-in defaults.
Unknown keys are rejected so that typos do not silently fall back to a
default. Scenario overrides may live under a ``"scenario"`` key in the
same document (see ``hcdpr.sim``); ``load_config`` ignores that key.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, ValidationError

LENGTH_FIELDS = (
    "l_a", "l_b", "l_c", "l_d", "l_e", "l_f", "l_g", "l_h", "l_bd", "l_m",
    "l_1", "l_2", "l_c1", "l_c2",
)
MASS_FIELDS = ("m_m", "m_1", "m_2")
INERTIA_FIELDS = ("I_m", "I_1", "I_2")


@dataclass(frozen=True)
class RobotParams:
    """Geometry, inertia and cable limits. SI units, angles in radians."""

    l_a: float = 0.440
    l_b: float = 0.268
    l_c: float = 0.105
    l_d: float = 0.412
    l_e: float = 3.000
    l_f: float = 1.000
    l_g: float = 0.086
    l_h: float = 0.105
    l_bd: float = 0.055
    l_m: float = 0.052
    l_1: float = 0.305
    l_2: float = 0.305
    l_c1: float = 0.1525
    l_c2: float = 0.1525
    m_m: float = 30.0
    m_1: float = 10.0
    m_2: float = 10.0
    I_m: float = 0.83
    I_1: float = 0.18
    I_2: float = 0.18
    T_min: float = 40.0
    T_max: float = 2000.0
    K_s: float = 1.1e4
    g: float = 9.810

    def __post_init__(self):
        validate(self)
        arr = np.array([getattr(self, f.name) for f in fields(self)], dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "_array", arr)

    def as_array(self) -> np.ndarray:
        """Field values in declaration order, for the compiled kernels (read-only)."""
        return self._array

    def replace(self, **changes) -> "RobotParams":
        return RobotParams(**{**asdict(self), **changes})

    @property
    def total_mass(self) -> float:
        return self.m_m + self.m_1 + self.m_2


@dataclass(frozen=True)
class EquivalentSprings:
    """Three-spring stand-in for the cables (platform x, z and rotation).

    Only used by the unforced energy model; the cable-driven plant replaces
    these spring forces with the cable wrench.
    """

    k_x: float = 0.0
    k_z: float = 0.0
    k_theta: float = 0.0
    x_m0: float = 0.0
    z_m0: float = 0.0
    theta_m0: float = 0.0

    def __post_init__(self):
        for name in ("k_x", "k_z", "k_theta"):
            if not getattr(self, name) >= 0:
                raise ValidationError(name, "spring constant must be >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=np.float64)


PARAM_NAMES = tuple(f.name for f in fields(RobotParams))


def validate(p: RobotParams) -> None:
    for name in PARAM_NAMES:
        v = getattr(p, name)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
            raise ValidationError(name, f"must be a finite number, got {v!r}")
    for name in LENGTH_FIELDS + MASS_FIELDS + INERTIA_FIELDS + ("K_s", "g"):
        if getattr(p, name) <= 0:
            raise ValidationError(name, "must be strictly positive")
    if p.T_min < 0:
        raise ValidationError("T_min", "must be >= 0")
    if not p.T_min < p.T_max:
        raise ValidationError("T_max", "must exceed T_min")
    if p.l_c1 > p.l_1:
        raise ValidationError("l_c1", "center of mass must lie on link 1")
    if p.l_c2 > p.l_2:
        raise ValidationError("l_c2", "center of mass must lie on link 2")


def default_params() -> RobotParams:
    return RobotParams()


def to_config(p: RobotParams) -> str:
    # repr() of a float round-trips exactly through json
    return json.dumps(asdict(p), indent=2)


def save_config(p: RobotParams, path) -> None:
    Path(path).write_text(to_config(p) + "\n")


def read_document(path) -> dict:
    """Parse a config file into a dict. Empty files are an empty document."""
    text = Path(path).read_text()
    if not text.strip():
        return {}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        line = text.splitlines()[e.lineno - 1] if e.lineno - 1 < len(text.splitlines()) else ""
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}\n    {line}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def params_from_dict(doc: dict) -> RobotParams:
    unknown = sorted(set(doc) - set(PARAM_NAMES) - {"scenario"})
    if unknown:
        raise ConfigError(f"unknown parameter(s): {', '.join(unknown)}")
    values = {k: v for k, v in doc.items() if k in PARAM_NAMES}
    for k, v in values.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(k, f"must be a number, got {v!r}")
        values[k] = float(v)
    return RobotParams(**values)


def load_config(path) -> RobotParams:
    return params_from_dict(read_document(path))
