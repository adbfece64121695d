"""Equations of motion of the coupled platform/arm system.

``M(q) qdd + C(q, qd) qd + G(q) + J_e^T w_e = [A T; tau_4; tau_5]``

The closed-form ``M``, ``C`` and ``G`` are written in terms of the absolute
arm angles ``a0 = theta_m + pi/2``, ``a1 = a0 + theta_1``,
``a2 = a1 + theta_2``. The platform rows of the generalized force come from
the cables; the equivalent three-spring model (``P_vs``) is kept for the
unforced energy checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import SingularInertiaError
from .kinematics import HALF_PI, GeneralizedState, CableGeometry, cable_kernel, jacobian_kernel
from .params import EquivalentSprings, RobotParams

UPPER = (0, 1, 4, 5)  # position-controlled cables (spring law)
LOWER = (2, 3)  # force-controlled cables


@dataclass(frozen=True)
class DynamicTerms:
    M: np.ndarray
    C: np.ndarray
    G: np.ndarray
    P_vs: np.ndarray


@dataclass(frozen=True)
class Wrench:
    """Planar force (F_x, F_z) and moment about +theta."""

    F_e: tuple[float, float] = (0.0, 0.0)
    M_e: float = 0.0

    @property
    def combined(self) -> np.ndarray:
        return np.array([self.F_e[0], self.F_e[1], self.M_e], dtype=float)

    @classmethod
    def zero(cls) -> "Wrench":
        return cls()


@dataclass(frozen=True)
class CableTensionState:
    T: np.ndarray
    L0: np.ndarray


@njit(cache=True)
def mass_matrix(q, p):
    l_m, l_1, l_c1, l_c2 = p[9], p[10], p[12], p[13]
    m_m, m_1, m_2, I_m, I_1, I_2 = p[14], p[15], p[16], p[17], p[18], p[19]
    a0 = q[2] + HALF_PI
    a1 = a0 + q[3]
    a2 = a1 + q[4]
    s0, c0 = math.sin(a0), math.cos(a0)
    s1, c1 = math.sin(a1), math.cos(a1)
    s2, c2 = math.sin(a2), math.cos(a2)
    ct1, ct2, ct12 = math.cos(q[3]), math.cos(q[4]), math.cos(q[3] + q[4])

    M = np.zeros((5, 5))
    M[0, 0] = m_1 + m_2 + m_m
    M[1, 1] = m_1 + m_2 + m_m
    M[0, 2] = -m_2 * (l_1 * s1 + l_m * s0 + l_c2 * s2) - m_1 * (l_c1 * s1 + l_m * s0)
    M[0, 3] = -m_2 * (l_1 * s1 + l_c2 * s2) - l_c1 * m_1 * s1
    M[0, 4] = -l_c2 * m_2 * s2
    M[1, 2] = m_2 * (l_1 * c1 + l_m * c0 + l_c2 * c2) + m_1 * (l_c1 * c1 + l_m * c0)
    M[1, 3] = m_2 * (l_1 * c1 + l_c2 * c2) + l_c1 * m_1 * c1
    M[1, 4] = l_c2 * m_2 * c2
    M[2, 2] = (
        I_1 + I_2 + I_m + l_1**2 * m_2 + l_c1**2 * m_1 + l_c2**2 * m_2
        + l_m**2 * m_1 + l_m**2 * m_2 + 2 * l_c2 * l_m * m_2 * ct12
        + 2 * l_1 * l_c2 * m_2 * ct2 + 2 * l_1 * l_m * m_2 * ct1 + 2 * l_c1 * l_m * m_1 * ct1
    )
    M[2, 3] = (
        m_2 * l_1**2 + 2 * m_2 * ct2 * l_1 * l_c2 + l_m * m_2 * ct1 * l_1 + m_1 * l_c1**2
        + l_m * m_1 * ct1 * l_c1 + m_2 * l_c2**2 + l_m * m_2 * ct12 * l_c2 + I_1 + I_2
    )
    M[2, 4] = I_2 + l_c2**2 * m_2 + l_c2 * l_m * m_2 * ct12 + l_1 * l_c2 * m_2 * ct2
    M[3, 3] = m_2 * l_1**2 + 2 * m_2 * ct2 * l_1 * l_c2 + m_1 * l_c1**2 + m_2 * l_c2**2 + I_1 + I_2
    M[3, 4] = m_2 * l_c2**2 + l_1 * m_2 * ct2 * l_c2 + I_2
    M[4, 4] = l_c2**2 * m_2 + I_2
    for i in range(5):
        for j in range(i):
            M[i, j] = M[j, i]
    return M


@njit(cache=True)
def coriolis_matrix(q, qd, p):
    l_m, l_1, l_c1, l_c2 = p[9], p[10], p[12], p[13]
    m_1, m_2 = p[15], p[16]
    a0 = q[2] + HALF_PI
    a1 = a0 + q[3]
    a2 = a1 + q[4]
    s0, c0 = math.sin(a0), math.cos(a0)
    s1, c1 = math.sin(a1), math.cos(a1)
    s2, c2 = math.sin(a2), math.cos(a2)
    st1, st2, st12 = math.sin(q[3]), math.sin(q[4]), math.sin(q[3] + q[4])
    wm, w1, w2 = qd[2], qd[3], qd[4]
    k1 = 2 * wm + w1
    k2 = 2 * wm + 2 * w1 + w2

    C = np.zeros((5, 5))
    C[0, 2] = -wm * (m_2 * (l_1 * c1 + l_m * c0 + l_c2 * c2) + m_1 * (l_c1 * c1 + l_m * c0))
    C[0, 3] = -k1 * (l_c2 * m_2 * c2 + l_1 * m_2 * c1 + l_c1 * m_1 * c1)
    C[0, 4] = -l_c2 * m_2 * c2 * k2
    C[1, 2] = -wm * (m_2 * (l_1 * s1 + l_m * s0 + l_c2 * s2) + m_1 * (l_c1 * s1 + l_m * s0))
    C[1, 3] = -k1 * (l_c2 * m_2 * s2 + l_1 * m_2 * s1 + l_c1 * m_1 * s1)
    C[1, 4] = -l_c2 * m_2 * s2 * k2
    C[2, 3] = -l_m * k1 * (l_1 * m_2 * st1 + l_c1 * m_1 * st1 + l_c2 * m_2 * st12)
    C[2, 4] = -l_c2 * m_2 * (l_m * st12 + l_1 * st2) * k2
    C[3, 2] = l_m * wm * (l_1 * m_2 * st1 + l_c1 * m_1 * st1 + l_c2 * m_2 * st12)
    C[3, 4] = -l_1 * l_c2 * m_2 * st2 * k2
    C[4, 2] = l_c2 * m_2 * wm * (l_m * st12 + l_1 * st2)
    C[4, 3] = l_1 * l_c2 * m_2 * st2 * k1
    return C


@njit(cache=True)
def gravity_vector(q, p):
    l_m, l_1, l_c1, l_c2 = p[9], p[10], p[12], p[13]
    m_m, m_1, m_2, g = p[14], p[15], p[16], p[23]
    a0 = q[2] + HALF_PI
    a1 = a0 + q[3]
    a2 = a1 + q[4]
    c0, c1, c2 = math.cos(a0), math.cos(a1), math.cos(a2)
    G = np.empty(5)
    G[0] = 0.0
    G[1] = (m_1 + m_2 + m_m) * g
    G[2] = (m_1 + m_2) * g * l_m * c0 + m_2 * g * l_c2 * c2 + (m_2 * l_1 + m_1 * l_c1) * g * c1
    G[3] = (m_2 * l_1 + m_1 * l_c1) * g * c1 + m_2 * g * l_c2 * c2
    G[4] = m_2 * g * l_c2 * c2
    return G


@njit(cache=True)
def spring_tensions(length, L01, T3, T4, L06, K_s, clamp):
    T = np.empty(6)
    T[0] = K_s / L01 * (length[0] - L01)
    T[1] = K_s / L01 * (length[1] - L01)
    T[2] = T3
    T[3] = T4
    T[4] = K_s / L06 * (length[4] - L06)
    T[5] = K_s / L06 * (length[5] - L06)
    if clamp:
        for i in range(6):
            if T[i] < 0.0:
                T[i] = 0.0
    return T


@njit(cache=True)
def cholesky_solve(M, b):
    """Solve M x = b for symmetric positive definite M; NaNs if not PD."""
    n = M.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        d = M[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if not d > 0.0:
            return np.full(n, np.nan)
        L[j, j] = math.sqrt(d)
        for i in range(j + 1, n):
            s = M[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    y = np.empty(n)
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]
    return x


@njit(cache=True)
def accel_kernel(q, qd, p, platform_force, tau4, tau5, ext):
    """qdd for a given generalized platform force (rows 1-3)."""
    M = mass_matrix(q, p)
    rhs = -coriolis_matrix(q, qd, p) @ qd - gravity_vector(q, p)
    if ext[0] != 0.0 or ext[1] != 0.0 or ext[2] != 0.0:
        rhs -= jacobian_kernel(q, p).T @ ext
    rhs[0] += platform_force[0]
    rhs[1] += platform_force[1]
    rhs[2] += platform_force[2]
    rhs[3] += tau4
    rhs[4] += tau5
    return cholesky_solve(M, rhs)


@njit(cache=True)
def plant_accel(q, qd, p, L01, T3, T4, L06, tau4, tau5, ext, clamp):
    """qdd of the cable-driven plant under the input u = (L01, T3, T4, L06)."""
    _, _, length, _, A = cable_kernel(q, p)
    T = spring_tensions(length, L01, T3, T4, L06, p[22], clamp)
    return accel_kernel(q, qd, p, A @ T, tau4, tau5, ext), T


def _arr(v) -> np.ndarray:
    return np.ascontiguousarray(v, dtype=np.float64).reshape(5)


def equivalent_spring_torques(q, springs: EquivalentSprings) -> np.ndarray:
    q = _arr(q)
    s = springs
    return np.array([
        s.k_x * (q[0] - s.x_m0),
        s.k_z * (q[1] - s.z_m0),
        s.k_theta * (q[2] - s.theta_m0),
    ])


def dynamic_terms(
    state: GeneralizedState, params: RobotParams, springs: EquivalentSprings | None = None
) -> DynamicTerms:
    p = params.as_array()
    q, qd = _arr(state.q), _arr(state.qdot)
    P_vs = np.zeros(5)
    if springs is not None:
        P_vs[:3] = equivalent_spring_torques(q, springs)
    return DynamicTerms(mass_matrix(q, p), coriolis_matrix(q, qd, p), gravity_vector(q, p), P_vs)


def energy(
    state: GeneralizedState, params: RobotParams, springs: EquivalentSprings | None = None
) -> tuple[float, float]:
    """Kinetic and potential energy of the platform, arm and equivalent springs."""
    from .kinematics import arm_points, com_velocities

    p = params.as_array()
    q, qd = _arr(state.q), _arr(state.qdot)
    v = com_velocities(q, qd, p)
    P = params
    kinetic = 0.5 * (
        P.m_m * (qd[0] ** 2 + qd[1] ** 2)
        + P.I_m * qd[2] ** 2
        + P.m_1 * (v[0] @ v[0])
        + P.I_1 * (qd[2] + qd[3]) ** 2
        + P.m_2 * (v[1] @ v[1])
        + P.I_2 * (qd[2] + qd[3] + qd[4]) ** 2
    )
    pts = arm_points(q, p)
    potential = P.g * (P.m_m * q[1] + P.m_1 * pts[1, 1] + P.m_2 * pts[3, 1])
    if springs is not None:
        s = springs
        potential += 0.5 * (
            s.k_x * (q[0] - s.x_m0) ** 2
            + s.k_z * (q[1] - s.z_m0) ** 2
            + s.k_theta * (q[2] - s.theta_m0) ** 2
        )
    return float(kinetic), float(potential)


def cable_potential(q, params: RobotParams, inputs) -> float:
    """Stored energy of the cables under a fixed input (bilateral springs).

    Spring cables store ``k/2 (L - L0)^2``; a constant-force cable acts like a
    weight on a pulley and stores ``T * L``.
    """
    L01, T3, T4, L06 = inputs
    length = cable_kernel(_arr(q), params.as_array())[2]
    K = params.K_s
    e = 0.5 * K / L01 * ((length[0] - L01) ** 2 + (length[1] - L01) ** 2)
    e += 0.5 * K / L06 * ((length[4] - L06) ** 2 + (length[5] - L06) ** 2)
    return float(e + T3 * length[2] + T4 * length[3])


def cable_tensions(geometry: CableGeometry, inputs, params: RobotParams, clamp: bool = False) -> CableTensionState:
    """Tensions from the hybrid input ``(L01, T3, T4, L06)``.

    Upper cables are springs around their unstretched lengths (L02 = L01,
    L05 = L06); lower cables carry the commanded force. With ``clamp`` a
    slack spring cable carries zero rather than negative tension.
    """
    L01, T3, T4, L06 = (float(v) for v in inputs)
    if L01 <= 0 or L06 <= 0:
        raise ValueError("unstretched lengths must be positive")
    T = spring_tensions(np.asarray(geometry.lengths, dtype=float), L01, T3, T4, L06, params.K_s, clamp)
    L0 = np.array([L01, L01, np.nan, np.nan, L06, L06])
    return CableTensionState(T=T, L0=L0)


def unstretched_lengths(lengths, T, K_s: float) -> np.ndarray:
    """Invert the spring law: L0 giving tension T at length L."""
    return K_s * np.asarray(lengths) / (K_s + np.asarray(T))


def forward_dynamics(
    state: GeneralizedState,
    tensions: CableTensionState,
    arm_torques,
    external: Wrench | None,
    params: RobotParams,
) -> np.ndarray:
    p = params.as_array()
    q, qd = _arr(state.q), _arr(state.qdot)
    A = cable_kernel(q, p)[4]
    ext = np.zeros(3) if external is None else external.combined
    tau4, tau5 = (float(t) for t in arm_torques)
    qdd = accel_kernel(q, qd, p, A @ np.asarray(tensions.T, dtype=float), tau4, tau5, ext)
    if not np.all(np.isfinite(qdd)):
        raise SingularInertiaError("inertia matrix is not positive definite at this state")
    return qdd


def generalized_cable_force(q, T, params: RobotParams) -> np.ndarray:
    """Platform rows of the generalized force produced by the cables, ``A T``."""
    A = cable_kernel(_arr(q), params.as_array())[4]
    return A @ np.asarray(T, dtype=float)
