"""Discrete PID laws and the two control structures.

Strategy A closes two independent loops: cable-length PID on (L1, L6)
commanding the unstretched lengths of the upper cables, and a joint PID on
the arm. The lower cables hold a constant tension.

Strategy B runs one PID on all five coordinates. The platform rows are a
corrective wrench that is added to the static load and distributed over the
cables by the stiffest admissible tension solution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import gravity_vector, unstretched_lengths
from .kinematics import GeneralizedState, cable_kernel
from .params import RobotParams
from .tension import distribute_kernel, static_wrench

log = logging.getLogger(__name__)

STRATEGY_A_CABLE_GAINS = (2e2, 10.0, 0.0)
STRATEGY_A_ARM_GAINS = (6e2, 20.0, 1e2)
STRATEGY_B_GAINS = (5e5, 3.5e7, 1.1e4)

_DIMS = {"A_cables": 2, "A_arm": 2, "B_joint": 5}


@dataclass(frozen=True)
class GainSet:
    K_p: float | np.ndarray = 0.0
    K_i: float | np.ndarray = 0.0
    K_d: float | np.ndarray = 0.0

    def __post_init__(self):
        for name in ("K_p", "K_i", "K_d"):
            v = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(v)) or np.any(v < 0):
                raise ValueError(f"{name} must be finite and >= 0")

    @classmethod
    def of(cls, gains) -> "GainSet":
        return gains if isinstance(gains, GainSet) else cls(*gains)


@dataclass
class ControllerState:
    integral: np.ndarray = field(default_factory=lambda: np.zeros(0))
    prev_error: np.ndarray | None = None
    prev_time: float = 0.0

    def reset(self) -> None:
        self.integral = np.zeros_like(self.integral)
        self.prev_error = None
        self.prev_time = 0.0

    @classmethod
    def fresh(cls, n: int) -> "ControllerState":
        return cls(integral=np.zeros(n))


@dataclass(frozen=True)
class ControlCommand:
    u_m: np.ndarray
    u_a: np.ndarray
    tension_inputs: tuple[float, float, float, float]
    saturated: bool = False


def error_vector(strategy: str, desired, actual) -> np.ndarray:
    if strategy not in _DIMS:
        raise ValueError(f"unknown strategy branch {strategy!r}")
    d = np.asarray(desired, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    n = _DIMS[strategy]
    if d.shape != (n,) or a.shape != (n,):
        raise ValueError(f"{strategy} expects {n}-vectors, got {d.shape} and {a.shape}")
    return d - a


def pid_step(
    state: ControllerState,
    e,
    t: float,
    gains: GainSet,
    limits: tuple | None = None,
    freeze=None,
) -> tuple[np.ndarray, ControllerState]:
    """One sample of ``K_p e + K_i int(e) + K_d de/dt``.

    The integral is trapezoidal and the derivative a backward difference;
    the first sample has zero derivative. With ``limits=(lo, hi)`` the output
    is clipped and a saturated channel stops integrating in the saturating
    direction. ``freeze`` is a boolean mask of channels whose integral is
    held this sample.
    """
    e = np.asarray(e, dtype=float)
    integral = state.integral if state.integral.shape == e.shape else np.zeros_like(e)
    prev = state.prev_error
    dt = t - state.prev_time
    if prev is None:
        if dt < 0:
            raise ValueError(f"sample time {t} precedes previous time {state.prev_time}")
        increment = e * dt
        base = gains.K_p * e
    else:
        if not dt > 0:
            raise ValueError(f"sample times must increase strictly ({state.prev_time} -> {t})")
        increment = 0.5 * (e + prev) * dt
        base = gains.K_p * e + gains.K_d * ((e - prev) / dt)
    if freeze is None:
        new_integral = integral + increment
    else:
        new_integral = np.where(np.asarray(freeze, dtype=bool), integral, integral + increment)
    out = base + gains.K_i * new_integral
    if limits is not None:
        lo, hi = limits
        push_up = (out > hi) & (increment > 0)
        push_down = (out < lo) & (increment < 0)
        new_integral = np.where(push_up | push_down, integral, new_integral)
        out = np.clip(base + gains.K_i * new_integral, lo, hi)
    return out, ControllerState(new_integral, e.copy(), float(t))


# --------------------------------------------------------------------------
# Strategy A
# --------------------------------------------------------------------------


@dataclass
class StrategyAStates:
    cables: ControllerState = field(default_factory=lambda: ControllerState.fresh(2))
    arm: ControllerState = field(default_factory=lambda: ControllerState.fresh(2))


def nominal_unstretched(q, params: RobotParams, T34=None) -> tuple[float, float]:
    """Upper-cable rest lengths that hold the platform at ``q`` statically.

    The lower cables pull with ``T34`` (default T_min each); the remaining
    wrench is carried by the upper pairs with L01 = L02 and L05 = L06.
    """
    p = params.as_array()
    q = np.ascontiguousarray(q, dtype=float)
    T34 = (params.T_min, params.T_min) if T34 is None else T34
    _, _, length, _, A = cable_kernel(q, p)
    W = static_wrench(params, q=q) - A[:, 2] * T34[0] - A[:, 3] * T34[1]
    # unknowns (T1, T5) with T2 = T1 - k1(L1 - L2), T6 = T5 - k5(L5 - L6) at L0 ~ L
    k1, k5 = params.K_s / length[0], params.K_s / length[4]
    B = np.column_stack([A[:, 0] + A[:, 1], A[:, 4] + A[:, 5]])
    rhs = W + A[:, 1] * k1 * (length[0] - length[1]) + A[:, 5] * k5 * (length[4] - length[5])
    (T1, T5), *_ = np.linalg.lstsq(B, rhs, rcond=None)
    L01, L05 = unstretched_lengths(length[[0, 4]], np.array([T1, T5]), params.K_s)
    return float(L01), float(L05)


def strategy_A_controller(
    desired,
    feedback: GeneralizedState,
    t: float,
    gains_I: GainSet,
    gains_II: GainSet,
    states: StrategyAStates,
    params: RobotParams,
    L0_nominal: tuple[float, float],
    T34: tuple[float, float] | None = None,
) -> tuple[ControlCommand, StrategyAStates, np.ndarray]:
    """Returns the command, updated states and the 4-vector error (L1, L6, th1, th2).

    The unstretched-length command is saturated so that, at the measured
    cable length, the spring tension would stay inside [T_min, T_max]; the
    cable PID stops integrating while saturated in the pushing direction.
    """
    desired = np.asarray(desired, dtype=float)
    length = cable_kernel(feedback.q, params.as_array())[2]
    measured = np.array([length[0], length[5]])
    e_c = error_vector("A_cables", desired[:2], measured)
    e_a = error_vector("A_arm", desired[2:], feedback.q[3:])
    lo, hi = winch_limits(measured, params)
    nominal = np.asarray(L0_nominal, dtype=float)
    u_m, cs = pid_step(states.cables, e_c, t, gains_I, limits=(lo - nominal, hi - nominal))
    u_a, arm = pid_step(states.arm, e_a, t, gains_II)
    T3, T4 = (params.T_min, params.T_min) if T34 is None else T34
    T3 = float(np.clip(T3, params.T_min, params.T_max))
    T4 = float(np.clip(T4, params.T_min, params.T_max))
    inputs = (float(nominal[0] + u_m[0]), T3, T4, float(nominal[1] + u_m[1]))
    cmd = ControlCommand(u_m=u_m, u_a=u_a, tension_inputs=inputs)
    return cmd, StrategyAStates(cs, arm), np.concatenate([e_c, e_a])


def winch_limits(lengths, params: RobotParams) -> tuple[np.ndarray, np.ndarray]:
    """Range of unstretched lengths keeping the spring tension in bounds at ``lengths``."""
    L = np.asarray(lengths, dtype=float)
    return params.K_s * L / (params.K_s + params.T_max), params.K_s * L / (params.K_s + params.T_min)


# --------------------------------------------------------------------------
# Strategy B
# --------------------------------------------------------------------------


def strategy_B_controller(
    desired,
    feedback: GeneralizedState,
    t: float,
    gains: GainSet,
    state: ControllerState,
    params: RobotParams,
    hold_platform_integral: bool = False,
) -> tuple[ControlCommand, ControllerState, np.ndarray]:
    """Joint-space PID with the platform rows routed through the tension solver.

    If no admissible distribution exists the tensions are saturated, a
    warning is logged at the start of each saturated stretch, and the platform integrals are held on the next
    sample (``hold_platform_integral``) so they do not wind up.
    """
    q = feedback.q
    e = error_vector("B_joint", desired, q)
    freeze = np.array([hold_platform_integral] * 3 + [False, False])
    u, state = pid_step(state, e, t, gains, freeze=freeze)
    p = params.as_array()
    W = gravity_vector(q, p)[:3] + u[:3]
    T, _, length, status = distribute_kernel(q, p, W)
    if status and not hold_platform_integral:
        log.warning("t=%.6g: no admissible tension distribution; tensions saturated", t)
    L0 = unstretched_lengths(length[[0, 5]], T[[0, 5]], params.K_s)
    inputs = (float(L0[0]), float(T[2]), float(T[3]), float(L0[1]))
    cmd = ControlCommand(u_m=u[:3], u_a=u[3:], tension_inputs=inputs, saturated=bool(status))
    return cmd, state, e


__all__ = [
    "GainSet", "ControllerState", "ControlCommand", "StrategyAStates",
    "error_vector", "pid_step", "nominal_unstretched", "winch_limits",
    "strategy_A_controller", "strategy_B_controller",
    "STRATEGY_A_CABLE_GAINS", "STRATEGY_A_ARM_GAINS", "STRATEGY_B_GAINS",
]
