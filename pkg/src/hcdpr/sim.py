"""Fixed-step closed-loop simulation and the built-in scenario catalog.

The plant is integrated with classical RK4. Commands are computed once per
step and held constant across the four stages; the cable tensions are
re-evaluated at every stage from the stage state and the held command.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np
from numba import njit

from .control import (
    STRATEGY_A_ARM_GAINS,
    STRATEGY_A_CABLE_GAINS,
    STRATEGY_B_GAINS,
    ControlCommand,
    ControllerState,
    GainSet,
    StrategyAStates,
    nominal_unstretched,
    strategy_A_controller,
    strategy_B_controller,
)
from .dynamics import accel_kernel, gravity_vector, mass_matrix, plant_accel
from .errors import ConfigError, DivergenceError
from .kinematics import EndEffectorPose, GeneralizedState, arm_points, cable_kernel
from .params import EquivalentSprings, RobotParams
from .tension import distribute_kernel

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e6
DEFAULT_DT = {"A": 1e-4, "B": 1e-5}
DEFAULT_DURATION = 3.0
STATE_NAMES = tuple(f"q[{i}]" for i in range(5)) + tuple(f"qdot[{i}]" for i in range(5))


# --------------------------------------------------------------------------
# plant
# --------------------------------------------------------------------------


@njit(cache=True)
def plant_rk4(y, p, u, tau, ext, dt, clamp):
    """One RK4 step of (q, qd) under the held input.

    ``u = (L01, T3, T4, L06)``, ``tau = (tau4, tau5)``. Also returns the
    acceleration and tensions at the start of the step.
    """
    q, v = y[:5], y[5:]
    a1, T = plant_accel(q, v, p, u[0], u[1], u[2], u[3], tau[0], tau[1], ext, clamp)
    q2 = q + 0.5 * dt * v
    v2 = v + 0.5 * dt * a1
    a2, _ = plant_accel(q2, v2, p, u[0], u[1], u[2], u[3], tau[0], tau[1], ext, clamp)
    q3 = q + 0.5 * dt * v2
    v3 = v + 0.5 * dt * a2
    a3, _ = plant_accel(q3, v3, p, u[0], u[1], u[2], u[3], tau[0], tau[1], ext, clamp)
    q4 = q + dt * v3
    v4 = v + dt * a3
    a4, _ = plant_accel(q4, v4, p, u[0], u[1], u[2], u[3], tau[0], tau[1], ext, clamp)
    out = np.empty(10)
    out[:5] = q + dt / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
    out[5:] = v + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    return out, a1, T


@njit(cache=True)
def _spring_accel(q, v, p, s):
    P = np.zeros(3)
    P[0] = s[0] * (q[0] - s[3])
    P[1] = s[1] * (q[1] - s[4])
    P[2] = s[2] * (q[2] - s[5])
    return accel_kernel(q, v, p, -P, 0.0, 0.0, np.zeros(3))


@njit(cache=True)
def spring_model_rk4(y, p, s, dt):
    """RK4 step of the torque-free three-spring model."""
    q, v = y[:5], y[5:]
    a1 = _spring_accel(q, v, p, s)
    a2 = _spring_accel(q + 0.5 * dt * v, v + 0.5 * dt * a1, p, s)
    v2 = v + 0.5 * dt * a1
    v3 = v + 0.5 * dt * a2
    a3 = _spring_accel(q + 0.5 * dt * v2, v3, p, s)
    v4 = v + dt * a3
    a4 = _spring_accel(q + dt * v3, v4, p, s)
    out = np.empty(10)
    out[:5] = q + dt / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
    out[5:] = v + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    return out


@njit(cache=True)
def energy_kernel(y, p, u, bilateral):
    """Kinetic energy and potential (gravity plus stored cable energy).

    Spring cables store ``k/2 (L - L0)^2`` (only when taut unless
    ``bilateral``); constant-force cables contribute ``T * L``.
    """
    q, v = y[:5], y[5:]
    ke = 0.5 * v @ (mass_matrix(q, p) @ v)
    pts = arm_points(q, p)
    pe = p[23] * (p[14] * q[1] + p[15] * pts[1, 1] + p[16] * pts[3, 1])
    length = cable_kernel(q, p)[2]
    K_s = p[22]
    for i in (0, 1, 4, 5):
        L0 = u[0] if i < 2 else u[3]
        d = length[i] - L0
        if bilateral or d > 0:
            pe += 0.5 * K_s / L0 * d * d
    pe += u[1] * length[2] + u[2] * length[3]
    return ke, pe


@njit(cache=True)
def spring_energy_kernel(y, p, s):
    q, v = y[:5], y[5:]
    ke = 0.5 * v @ (mass_matrix(q, p) @ v)
    pts = arm_points(q, p)
    pe = p[23] * (p[14] * q[1] + p[15] * pts[1, 1] + p[16] * pts[3, 1])
    pe += 0.5 * (s[0] * (q[0] - s[3]) ** 2 + s[1] * (q[1] - s[4]) ** 2 + s[2] * (q[2] - s[5]) ** 2)
    return ke + pe


def spring_model_energy(y, params: RobotParams, springs: EquivalentSprings) -> float:
    return float(spring_energy_kernel(np.asarray(y, dtype=float), params.as_array(), springs.as_array()))


def _check_finite(y: np.ndarray, t: float, records=None) -> None:
    if np.abs(y).max() <= DIVERGENCE_LIMIT:
        return
    bad = ~np.isfinite(y) | (np.abs(y) > DIVERGENCE_LIMIT)
    if bad.any():
        raise DivergenceError(t, STATE_NAMES[int(np.flatnonzero(bad)[0])], records)


def integrate_step(
    state: GeneralizedState,
    command: ControlCommand,
    params: RobotParams,
    dt: float,
    external=None,
    t: float = 0.0,
) -> GeneralizedState:
    """Advance the cable-driven plant by one RK4 step with the command held."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    ext = np.zeros(3) if external is None else np.asarray(external.combined, dtype=float)
    y, _, _ = plant_rk4(
        state.as_vector(), params.as_array(), np.asarray(command.tension_inputs, dtype=float),
        np.asarray(command.u_a, dtype=float), ext, dt, True,
    )
    _check_finite(y, t + dt)
    return GeneralizedState(y[:5], y[5:])


# --------------------------------------------------------------------------
# scenarios
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineTrajectory:
    """Desired values ``offset + slope * t``."""

    offset: tuple[float, ...]
    slope: tuple[float, ...]

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.offset, dtype=float) + np.asarray(self.slope, dtype=float) * t


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    q_d: np.ndarray


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    strategy: str
    gains: tuple[GainSet, ...]
    trajectory: AffineTrajectory
    duration: float = DEFAULT_DURATION
    dt: float | None = None
    initial_state: GeneralizedState = field(default_factory=GeneralizedState.at_rest)
    tension_policy: str = "constant"
    T34: tuple[float, float] | None = None

    def __post_init__(self):
        if self.strategy not in ("A", "B"):
            raise ValueError(f"strategy must be 'A' or 'B', got {self.strategy!r}")
        if self.dt is None:
            object.__setattr__(self, "dt", DEFAULT_DT[self.strategy])
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.duration >= self.dt:
            raise ValueError("duration must be at least one step")
        if self.tension_policy not in ("constant", "optimized"):
            raise ValueError(f"unknown tension policy {self.tension_policy!r}")
        need = 4 if self.strategy == "A" else 5
        if len(self.trajectory.offset) != need or len(self.trajectory.slope) != need:
            raise ValueError(f"strategy {self.strategy} trajectories have {need} channels")

    def sample(self, t: float) -> TrajectorySample:
        return TrajectorySample(t, self.trajectory(t))

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def replace(self, **changes) -> "ScenarioSpec":
        from dataclasses import replace as _replace

        return _replace(self, **changes)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "strategy": self.strategy,
            "gains": [asdict(g) for g in self.gains],
            "trajectory": asdict(self.trajectory),
            "duration": self.duration,
            "dt": self.dt,
            "initial_q": self.initial_state.q.tolist(),
            "initial_qdot": self.initial_state.qdot.tolist(),
            "tension_policy": self.tension_policy,
        }


def builtin_scenarios() -> dict[str, ScenarioSpec]:
    ga = (GainSet(*STRATEGY_A_CABLE_GAINS), GainSet(*STRATEGY_A_ARM_GAINS))
    gb = (GainSet(*STRATEGY_B_GAINS),)
    A, B = "A", "B"
    specs = [
        ScenarioSpec("case1", A, ga, AffineTrajectory((1.35, 1.35, 0, 0), (0, 0, 0, 0))),
        ScenarioSpec("case2", B, gb, AffineTrajectory((2e-3, 4e-3, 0, 0, 0), (0, 0, 0, 0, 0)), tension_policy="optimized"),
        ScenarioSpec("case3a", A, ga, AffineTrajectory((1.35, 1.35, 0, 0), (0, 0, 0.1, 0.1))),
        ScenarioSpec("case3b", A, ga, AffineTrajectory((1.35, 1.35, 0, 0), (-0.01, 0.01, 0, 0))),
        ScenarioSpec("case4a", B, gb, AffineTrajectory((0, 0, 0, 0, 0), (0, 0, 0, 1.0, -1.0)), tension_policy="optimized"),
        ScenarioSpec("case4b", B, gb, AffineTrajectory((0, 0, 0, 0, 0), (-0.1, -0.05, 0, 0, 0)), tension_policy="optimized"),
    ]
    return {s.name: s for s in specs}


_OVERRIDABLE = {"duration", "dt", "initial_q", "initial_qdot", "gains", "T34", "offset", "slope", "base"}


def scenario_from_dict(doc: dict, scenarios: dict | None = None) -> ScenarioSpec:
    """Build a scenario from a config ``"scenario"`` section.

    ``base`` names a built-in scenario to start from; the remaining keys
    override it. ``gains`` is a list of ``[K_p, K_i, K_d]`` triples.
    """
    scenarios = builtin_scenarios() if scenarios is None else scenarios
    unknown = sorted(set(doc) - _OVERRIDABLE - {"name", "strategy", "tension_policy"})
    if unknown:
        raise ConfigError(f"unknown scenario key(s): {', '.join(unknown)}")
    base_name = doc.get("base", doc.get("name"))
    if base_name not in scenarios:
        raise ConfigError(f"scenario base {base_name!r} is not one of {sorted(scenarios)}")
    spec = scenarios[base_name]
    changes: dict = {}
    if "name" in doc:
        changes["name"] = str(doc["name"])
    for key in ("duration", "dt"):
        if key in doc:
            changes[key] = float(doc[key])
    if "strategy" in doc:
        changes["strategy"] = doc["strategy"]
    if "tension_policy" in doc:
        changes["tension_policy"] = doc["tension_policy"]
    if "gains" in doc:
        changes["gains"] = tuple(GainSet(*map(float, g)) for g in doc["gains"])
    if "T34" in doc:
        changes["T34"] = tuple(float(v) for v in doc["T34"])
    if "offset" in doc or "slope" in doc:
        changes["trajectory"] = AffineTrajectory(
            tuple(float(v) for v in doc.get("offset", spec.trajectory.offset)),
            tuple(float(v) for v in doc.get("slope", spec.trajectory.slope)),
        )
    if "initial_q" in doc or "initial_qdot" in doc:
        changes["initial_state"] = GeneralizedState(
            doc.get("initial_q", spec.initial_state.q), doc.get("initial_qdot", spec.initial_state.qdot)
        )
    try:
        return spec.replace(**changes)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid scenario override: {e}") from e


# --------------------------------------------------------------------------
# rollout
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimRecord:
    t: float
    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray
    T: np.ndarray
    commands: ControlCommand
    e: np.ndarray
    p_e: EndEffectorPose
    energy: tuple[float, float]


@dataclass
class SimResult:
    """Column-oriented record sequence; indexing yields ``SimRecord``."""

    spec: ScenarioSpec
    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray
    T: np.ndarray
    e: np.ndarray
    tau: np.ndarray
    inputs: np.ndarray
    u_m: np.ndarray
    p_e: np.ndarray
    energy: np.ndarray
    saturated: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> SimRecord:
        cmd = ControlCommand(self.u_m[k], self.tau[k], tuple(self.inputs[k]), bool(self.saturated[k]))
        return SimRecord(
            float(self.t[k]), self.q[k], self.qdot[k], self.qddot[k], self.T[k], cmd, self.e[k],
            EndEffectorPose(*self.p_e[k]), tuple(self.energy[k]),
        )

    def __iter__(self) -> Iterator[SimRecord]:
        return (self[k] for k in range(len(self)))

    def truncated(self, n: int) -> "SimResult":
        cols = {k: v[:n] for k, v in self.__dict__.items() if isinstance(v, np.ndarray)}
        return SimResult(spec=self.spec, **cols)


def _allocate(spec: ScenarioSpec, n: int) -> SimResult:
    ne = 4 if spec.strategy == "A" else 5
    nu = 2 if spec.strategy == "A" else 3
    z = lambda *s: np.zeros((n, *s))  # noqa: E731
    return SimResult(
        spec, np.zeros(n), z(5), z(5), z(5), z(6), z(ne), z(2), z(4), z(nu), z(3), z(2),
        np.zeros(n, dtype=bool),
    )


@njit(cache=True)
def closed_loop_kernel(strategy_b, p, y0, n, dt, offset, slope, Kp, Ki, Kd, L0_nom, T34, ext, out):
    """Compiled closed loop, equivalent to the Python reference engine.

    Channels are (L1, L6, theta_1, theta_2) for Strategy A and q for
    Strategy B; gains are per channel. Fills the arrays in ``out`` and
    returns the number of samples written (fewer than ``n`` on divergence).
    """
    t_out, q_out, qd_out, qdd_out, T_out, e_out, tau_out, u_out, um_out, pe_out, en_out, sat_out = out
    ne = offset.shape[0]
    K_s, T_min, T_max = p[22], p[20], p[21]
    y = y0.copy()
    integral = np.zeros(ne)
    prev = np.zeros(ne)
    hold = False
    u = np.empty(4)
    tau = np.empty(2)
    for k in range(n):
        t = k * dt
        q = y[:5]
        e = np.empty(ne)
        if strategy_b:
            for j in range(5):
                e[j] = (offset[j] + slope[j] * t) - q[j]
        else:
            length = cable_kernel(q, p)[2]
            e[0] = (offset[0] + slope[0] * t) - length[0]
            e[1] = (offset[1] + slope[1] * t) - length[5]
            e[2] = (offset[2] + slope[2] * t) - q[3]
            e[3] = (offset[3] + slope[3] * t) - q[4]
        # PID: trapezoid integral, backward-difference derivative, first sample from t = 0
        lo = np.full(ne, -np.inf)
        hi = np.full(ne, np.inf)
        if not strategy_b:
            for j, c in ((0, 0), (1, 5)):
                lo[j] = K_s * length[c] / (K_s + T_max) - L0_nom[j]
                hi[j] = K_s * length[c] / (K_s + T_min) - L0_nom[j]
        pid = np.empty(ne)
        for j in range(ne):
            if k == 0:
                inc = e[j] * t
                base = Kp[j] * e[j]
            else:
                inc = 0.5 * (e[j] + prev[j]) * dt
                base = Kp[j] * e[j] + Kd[j] * ((e[j] - prev[j]) / dt)
            old = integral[j]
            if not (strategy_b and hold and j < 3):
                integral[j] = old + inc
            out_j = base + Ki[j] * integral[j]
            if (out_j > hi[j] and inc > 0) or (out_j < lo[j] and inc < 0):
                integral[j] = old
            pid[j] = min(max(base + Ki[j] * integral[j], lo[j]), hi[j])
            prev[j] = e[j]
        saturated = False
        if strategy_b:
            W = gravity_vector(q, p)[:3] + pid[:3]
            T, _, length, status = distribute_kernel(q, p, W)
            saturated = status != 0
            hold = saturated
            u[0] = K_s * length[0] / (K_s + T[0])
            u[1] = T[2]
            u[2] = T[3]
            u[3] = K_s * length[5] / (K_s + T[5])
            tau[0], tau[1] = pid[3], pid[4]
            for j in range(3):
                um_out[k, j] = pid[j]
        else:
            u[0] = L0_nom[0] + pid[0]
            u[1] = min(max(T34[0], T_min), T_max)
            u[2] = min(max(T34[1], T_min), T_max)
            u[3] = L0_nom[1] + pid[1]
            tau[0], tau[1] = pid[2], pid[3]
            um_out[k, 0], um_out[k, 1] = pid[0], pid[1]
        y_next, qdd, Tc = plant_rk4(y, p, u, tau, ext, dt, True)
        pts = arm_points(q, p)
        t_out[k] = t
        q_out[k] = y[:5]
        qd_out[k] = y[5:]
        qdd_out[k] = qdd
        T_out[k] = Tc
        e_out[k] = e
        tau_out[k] = tau
        u_out[k] = u
        pe_out[k, 0], pe_out[k, 1] = pts[4, 0], pts[4, 1]
        pe_out[k, 2] = y[2] + 0.5 * math.pi + y[3] + y[4]
        ke, pot = energy_kernel(y, p, u, False)
        en_out[k, 0], en_out[k, 1] = ke, pot
        sat_out[k] = saturated
        if k == n - 1:
            return n
        if not np.abs(y_next).max() <= DIVERGENCE_LIMIT:
            return -(k + 1)
        y = y_next
    return n


def _channel_gains(spec: ScenarioSpec):
    if spec.strategy == "A":
        g1, g2 = spec.gains
        pick = lambda name: np.array([*np.broadcast_to(getattr(g1, name), 2), *np.broadcast_to(getattr(g2, name), 2)], dtype=float)  # noqa: E731
    else:
        (g,) = spec.gains
        pick = lambda name: np.array(np.broadcast_to(getattr(g, name), 5), dtype=float)  # noqa: E731
    return pick("K_p"), pick("K_i"), pick("K_d")


def _log_saturation(res: SimResult) -> None:
    starts = np.flatnonzero(res.saturated & ~np.r_[False, res.saturated[:-1]])
    for k in starts:
        log.warning("t=%.6g: no admissible tension distribution; tensions saturated", res.t[k])


def run_scenario(spec: ScenarioSpec, params: RobotParams, external=None, engine: str = "compiled") -> SimResult:
    """Closed-loop rollout, one record per sample from t = 0 to ``duration``.

    ``engine="python"`` steps the controller functions of ``hcdpr.control``
    one sample at a time; the default compiled engine runs the same loop in
    a single kernel call. Raises ``DivergenceError`` carrying the records
    collected so far.
    """
    if engine == "python":
        return _run_python(spec, params, external)
    if engine != "compiled":
        raise ValueError(f"unknown engine {engine!r}")
    p = params.as_array()
    ext = np.zeros(3) if external is None else np.asarray(external.combined, dtype=float)
    n = spec.steps + 1
    res = _allocate(spec, n)
    T34 = np.asarray(spec.T34 or (params.T_min, params.T_min), dtype=float)
    L0_nom = np.zeros(2)
    if spec.strategy == "A":
        L0_nom = np.asarray(nominal_unstretched(spec.initial_state.q, params, tuple(T34)), dtype=float)
    Kp, Ki, Kd = _channel_gains(spec)
    out = (res.t, res.q, res.qdot, res.qddot, res.T, res.e, res.tau, res.inputs, res.u_m, res.p_e, res.energy, res.saturated)
    written = closed_loop_kernel(
        spec.strategy == "B", p, spec.initial_state.as_vector(), n, spec.dt,
        np.asarray(spec.trajectory.offset, dtype=float), np.asarray(spec.trajectory.slope, dtype=float),
        Kp, Ki, Kd, L0_nom, T34, ext, out,
    )
    if written < 0:
        k = -written
        partial = res.truncated(k)
        _log_saturation(partial)
        y_bad, _, _ = plant_rk4(
            np.r_[res.q[k - 1], res.qdot[k - 1]], p, res.inputs[k - 1], res.tau[k - 1], ext, spec.dt, True
        )
        err = DivergenceError(k * spec.dt, STATE_NAMES[int(np.argmax(~(np.abs(y_bad) <= DIVERGENCE_LIMIT)))], partial)
        raise err
    _log_saturation(res)
    return res


def _run_python(spec: ScenarioSpec, params: RobotParams, external=None) -> SimResult:
    p = params.as_array()
    ext = np.zeros(3) if external is None else np.asarray(external.combined, dtype=float)
    n = spec.steps + 1
    res = _allocate(spec, n)
    y = spec.initial_state.as_vector().copy()
    dt = spec.dt

    if spec.strategy == "A":
        T34 = spec.T34 or (params.T_min, params.T_min)
        L0_nom = nominal_unstretched(spec.initial_state.q, params, T34)
        gains_I, gains_II = spec.gains
        states = StrategyAStates()
    else:
        (gains,) = spec.gains
        bstate = ControllerState.fresh(5)
        hold = False

    for k in range(n):
        t = k * dt
        fb = GeneralizedState.trusted(y[:5], y[5:])
        q_d = spec.trajectory(t)
        if spec.strategy == "A":
            cmd, states, e = strategy_A_controller(q_d, fb, t, gains_I, gains_II, states, params, L0_nom, T34)
        else:
            cmd, bstate, e = strategy_B_controller(q_d, fb, t, gains, bstate, params, hold)
            hold = cmd.saturated
        u = np.asarray(cmd.tension_inputs, dtype=float)
        tau = np.asarray(cmd.u_a, dtype=float)
        y_next, qdd, T = plant_rk4(y, p, u, tau, ext, dt, True)
        pts = arm_points(y[:5], p)
        res.t[k] = t
        res.q[k], res.qdot[k], res.qddot[k], res.T[k] = y[:5], y[5:], qdd, T
        res.e[k], res.tau[k], res.inputs[k], res.u_m[k] = e, tau, u, cmd.u_m
        res.p_e[k] = (pts[4, 0], pts[4, 1], y[2] + 0.5 * math.pi + y[3] + y[4])
        res.energy[k] = energy_kernel(y, p, u, False)
        res.saturated[k] = cmd.saturated
        if k == n - 1:
            break
        try:
            _check_finite(y_next, t + dt)
        except DivergenceError as err:
            err.records = res.truncated(k + 1)
            raise
        y = y_next
    return res


# --------------------------------------------------------------------------
# unforced energy rollouts
# --------------------------------------------------------------------------


@njit(cache=True)
def _cable_rollout_kernel(y, p, u, n, dt):
    E = np.empty(n + 1)
    zero2, zero3 = np.zeros(2), np.zeros(3)
    for k in range(n + 1):
        ke, pe = energy_kernel(y, p, u, True)
        E[k] = ke + pe
        if k < n:
            y, _, _ = plant_rk4(y, p, u, zero2, zero3, dt, False)
    return E, y


@njit(cache=True)
def _spring_rollout_kernel(y, p, s, n, dt):
    E = np.empty(n + 1)
    for k in range(n + 1):
        E[k] = spring_energy_kernel(y, p, s)
        if k < n:
            y = spring_model_rk4(y, p, s, dt)
    return E, y


def cable_energy_rollout(params: RobotParams, state: GeneralizedState, inputs, duration: float, dt: float):
    """Torque-free plant with fixed cable inputs and bilateral spring cables.

    Returns (t, total energy, final state).
    """
    n = int(round(duration / dt))
    E, y = _cable_rollout_kernel(state.as_vector(), params.as_array(), np.asarray(inputs, dtype=float), n, dt)
    return np.arange(n + 1) * dt, E, y


def spring_energy_rollout(params: RobotParams, springs: EquivalentSprings, state: GeneralizedState, duration: float, dt: float):
    """Torque-free three-spring model. Returns (t, total energy, final state)."""
    n = int(round(duration / dt))
    E, y = _spring_rollout_kernel(state.as_vector(), params.as_array(), springs.as_array(), n, dt)
    return np.arange(n + 1) * dt, E, y


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def settling_time(t: np.ndarray, e: np.ndarray, thresholds) -> float:
    """First time after which every channel stays within its threshold; inf if never."""
    inside = np.all(np.abs(e) <= np.asarray(thresholds), axis=1)
    if not inside[-1]:
        return math.inf
    outside = np.flatnonzero(~inside)
    return float(t[0] if outside.size == 0 else t[min(outside[-1] + 1, len(t) - 1)])


def settling_thresholds(spec: ScenarioSpec, e: np.ndarray, fraction: float = 0.05) -> np.ndarray:
    """Per-channel error bands used to call a Strategy B run settled.

    Step references: ``fraction`` of each channel's step size. Ramps: that
    fraction of each driven channel's peak error. Channels that are not
    driven use the band of the largest driven channel.
    """
    slope = np.asarray(spec.trajectory.slope, dtype=float)
    if np.any(slope):
        driven = slope != 0
        ref = np.max(np.abs(e), axis=0)
    else:
        ref = np.abs(np.asarray(spec.trajectory.offset, dtype=float) - spec.initial_state.q[: len(slope)])
        driven = ref != 0
    if not driven.any():
        return np.full(e.shape[1], np.inf)
    top = ref[driven].max()
    return fraction * np.where(driven, ref, top)


def oscillation_ratio(t: np.ndarray, e: np.ndarray, channels=None) -> float:
    """Half peak-to-peak error over the last quarter divided by the peak error."""
    e = e if channels is None else e[:, channels]
    tail = e[t >= t[0] + 0.75 * (t[-1] - t[0])]
    amp = 0.5 * np.max(tail.max(axis=0) - tail.min(axis=0))
    peak = np.max(np.abs(e))
    return float(amp / peak) if peak > 0 else 0.0


@dataclass(frozen=True)
class RunSummary:
    settling_time: float
    peak_error: float
    final_T: np.ndarray
    oscillation_ratio: float
    sustained: bool
    min_T34: float

    def line(self, name: str) -> str:
        ts = "never" if math.isinf(self.settling_time) else f"{self.settling_time:.4f} s"
        T = ", ".join(f"{v:.2f}" for v in self.final_T)
        osc = "sustained" if self.sustained else "damped"
        return (
            f"{name}: settling time {ts}; peak error {self.peak_error:.6g}; "
            f"final T [{T}] N; oscillation: {osc} (ratio {self.oscillation_ratio:.3f})"
        )


SUSTAINED_RATIO = 0.1
CABLE_CHANNELS = [0, 1]


def summarize(res: SimResult) -> RunSummary:
    spec = res.spec
    channels = CABLE_CHANNELS if spec.strategy == "A" else None
    ratio = oscillation_ratio(res.t, res.e, channels)
    if spec.strategy == "B":
        ts = settling_time(res.t, res.e, settling_thresholds(spec, res.e))
    else:
        ts = settling_time(res.t, res.e[:, CABLE_CHANNELS], 0.05 * np.max(np.abs(res.e[:, CABLE_CHANNELS]), axis=0))
    return RunSummary(
        settling_time=ts,
        peak_error=float(np.max(np.abs(res.e))),
        final_T=res.T[-1].copy(),
        oscillation_ratio=ratio,
        sustained=ratio >= SUSTAINED_RATIO,
        min_T34=float(res.T[:, 2:4].min()),
    )
