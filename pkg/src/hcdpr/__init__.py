"""Planar hybrid cable-driven parallel robot: a cable-suspended platform
carrying a two-link arm.

Modules: ``params`` (constants, config), ``kinematics``, ``dynamics``,
``tension`` (distribution and stiffness), ``control`` (PID strategies),
``sim`` (closed-loop scenarios) and ``cli``.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.1.0"

from .params import EquivalentSprings, RobotParams, default_params, load_config  # noqa: E402

__all__ = ["RobotParams", "EquivalentSprings", "default_params", "load_config", "__version__"]
