"""Static tension distribution and stiffness of the cable-suspended platform.

Equilibrium of the platform is ``A T = W_m``. The six tensions have three
degrees of freedom left over, ``T = T_A + N_A lambda``. Requiring that the
paired upper cables share an unstretched length (L01 = L02, L05 = L06)
removes lambda_1 and lambda_2, leaving a line ``T = lambda_3 D_A + E_A``.
Moving up that line raises the antagonistic tension, and with it the
tension part of the stiffness, until the first cable hits a bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dynamics import Wrench, gravity_vector
from .errors import (
    ConstraintDegeneracyError,
    DegenerateGeometryError,
    InfeasibleTensionError,
    SingularConfigurationError,
)
from .kinematics import CableGeometry, cable_geometry, cable_kernel
from .params import RobotParams

RANK_TOL = 1e-9
DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class RedundancySolution:
    T_A: np.ndarray
    N_A: np.ndarray
    lam: np.ndarray
    T: np.ndarray


@dataclass(frozen=True)
class StiffnessDecomposition:
    K: np.ndarray
    K_T: np.ndarray
    K_k: np.ndarray
    K_c: np.ndarray

    def planar(self) -> np.ndarray:
        """3x3 stiffness in (x_m, z_m, theta_m)."""
        return planar_stiffness(self.K)


@dataclass(frozen=True)
class LambdaReduction:
    D_A: np.ndarray
    E_A: np.ndarray
    a1: float
    b1: float
    c1: float
    a2: float
    b2: float
    c2: float
    N_A: np.ndarray
    T_A: np.ndarray

    def tensions(self, lambda3: float) -> np.ndarray:
        return lambda3 * self.D_A + self.E_A

    def lambdas(self, lambda3: float) -> np.ndarray:
        """(lambda_1, lambda_2, lambda_3) on the constrained line."""
        n = self.N_A
        c1 = self.c1 + (n[1, 2] - n[0, 2]) * lambda3
        c2 = self.c2 + (n[5, 2] - n[4, 2]) * lambda3
        den = self.a1 * self.b2 - self.a2 * self.b1
        return np.array([(self.b2 * c1 - self.b1 * c2) / den, (self.a1 * c2 - self.a2 * c1) / den, lambda3])


@dataclass(frozen=True)
class TensionSolution:
    """Result of the full optimal-distribution pipeline at one pose."""

    A: np.ndarray
    W_m: np.ndarray
    redundancy: RedundancySolution
    reduction: LambdaReduction
    lambda3: float
    T: np.ndarray
    L0: np.ndarray


def static_wrench(
    params: RobotParams, external: Wrench | None = None, q=None, include_arm: bool = True
) -> np.ndarray:
    """Wrench (F_x, F_z, M) the cables must supply to hold the platform still.

    The weight enters the F_z slot with a positive sign, so that upward
    cable pull balances it. With ``include_arm`` the arm's weight and its
    moment about the platform centre (at pose ``q``) are added.
    """
    if include_arm:
        qq = np.zeros(5) if q is None else np.ascontiguousarray(q, dtype=float).reshape(5)
        W = gravity_vector(qq, params.as_array())[:3].copy()
    else:
        W = np.array([0.0, params.m_m * params.g, 0.0])
    if external is not None:
        W = W + external.combined
    return W


def _check_rank(A: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= RANK_TOL * max(1.0, s[0]):
        raise SingularConfigurationError(f"structure matrix is rank deficient (sigma_min={s[-1]:.3g})")
    return s


def particular_solution(A: np.ndarray, W_m) -> np.ndarray:
    """Minimum-norm tensions satisfying ``A T = W_m``."""
    A = np.asarray(A, dtype=float)
    _check_rank(A)
    return A.T @ np.linalg.solve(A @ A.T, np.asarray(W_m, dtype=float))


@njit(cache=True)
def _kernel_basis(A):
    _, _, vt = np.linalg.svd(A)
    N = vt[3:].T.copy()
    key = np.empty(3, dtype=np.int64)
    for j in range(3):
        k = np.argmax(np.abs(N[:, j]))
        if N[k, j] < 0:
            N[:, j] = -N[:, j]
        key[j] = k
    # descending index of the largest entry; stable for ties
    order = np.argsort(-key, kind="mergesort")
    return N[:, order].copy()


def null_basis(A: np.ndarray) -> np.ndarray:
    """Orthonormal 6x3 kernel basis in a deterministic orientation.

    Each column is flipped so that its largest-magnitude entry is positive,
    and columns are sorted by the row of that entry, highest first.
    """
    A = np.ascontiguousarray(A, dtype=float)
    _check_rank(A)
    return _kernel_basis(A)


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def stiffness_matrices(
    geometry: CableGeometry, T, params: RobotParams, L0=None
) -> StiffnessDecomposition:
    """Spatial 6x6 stiffness ``K = -dw/dp`` of the platform.

    ``K_T`` sums the geometric (tension) contribution of all six cables;
    ``K_k`` sums the elastic contribution of the spring cables 1, 2, 5, 6 with
    ``k_i = K_s / L0_i``. Cables 3 and 4 are force-controlled and have no
    elastic term. Coordinates are (x, y, z, rx, ry, rz) with the plane at
    y = 0.
    """
    T = np.asarray(T, dtype=float)
    lengths = np.asarray(geometry.lengths, dtype=float)
    if np.any(lengths < 1e-12):
        raise DegenerateGeometryError("zero-length cable in stiffness evaluation")
    L0 = lengths.copy() if L0 is None else np.asarray(L0, dtype=float)
    k = np.zeros(6)
    for i in (0, 1, 4, 5):
        k[i] = params.K_s / L0[i]
    K_T = np.zeros((6, 6))
    K_k = np.zeros((6, 6))
    eye = np.eye(3)
    for i in range(6):
        u = geometry.unit_vectors[i]
        rx = _skew(geometry.moment_arms[i])
        ux = _skew(u)
        P = eye - np.outer(u, u)
        K_T += T[i] / lengths[i] * np.block([
            [P, P @ rx.T],
            [rx @ P, rx @ P @ rx.T + lengths[i] * ux @ rx.T],
        ])
        if k[i]:
            U = np.outer(u, u)
            K_k += k[i] * np.block([[U, U @ rx.T], [rx @ U, rx @ U @ rx.T]])
    return StiffnessDecomposition(K=K_T + K_k, K_T=K_T, K_k=K_k, K_c=np.diag(k))


def planar_stiffness(K6: np.ndarray) -> np.ndarray:
    """Restrict a spatial stiffness to (x_m, z_m, theta_m).

    theta_m turns +x toward +z, which is a negative rotation about +y.
    """
    idx = [0, 2, 4]
    S = np.diag([1.0, 1.0, -1.0])
    return S @ K6[np.ix_(idx, idx)] @ S


@njit(cache=True)
def _elimination(T_A, N, lengths, k1, k5):
    a1 = N[0, 0] - N[1, 0]
    b1 = N[0, 1] - N[1, 1]
    a2 = N[4, 0] - N[5, 0]
    b2 = N[4, 1] - N[5, 1]
    c1 = k1 * (lengths[0] - lengths[1]) + T_A[1] - T_A[0]
    c2 = k5 * (lengths[4] - lengths[5]) + T_A[5] - T_A[4]
    return a1, b1, c1, a2, b2, c2


def lambda_reduction(
    T_A, N_A, geometry: CableGeometry, params: RobotParams, L0=None
) -> LambdaReduction:
    """Eliminate lambda_1 and lambda_2 with the paired-cable constraints.

    The constraints are ``T1 - T2 = k1 (L1 - L2)`` and
    ``T5 - T6 = k5 (L5 - L6)``, which is what equal unstretched lengths mean
    for spring cables. ``c1``/``c2`` are stored at lambda_3 = 0.

    If the resulting direction ``D_A`` lowers the tensions on average, the
    third basis column is negated so that raising lambda_3 tightens the
    cables; the returned ``N_A`` reflects that orientation.
    """
    T_A = np.asarray(T_A, dtype=float)
    N = np.array(N_A, dtype=float)
    lengths = np.asarray(geometry.lengths, dtype=float)
    L0 = lengths if L0 is None else np.asarray(L0, dtype=float)
    k1 = params.K_s / L0[0]
    k5 = params.K_s / L0[4]
    a1, b1, c1, a2, b2, c2 = _elimination(T_A, N, lengths, k1, k5)
    den = a1 * b2 - a2 * b1
    if abs(den) < DEGENERACY_TOL:
        raise ConstraintDegeneracyError(f"paired-cable elimination is degenerate (det={den:.3g})")

    def line(N):
        d1 = N[1, 2] - N[0, 2]
        d2 = N[5, 2] - N[4, 2]
        D = N[:, 2] + N[:, 0] * (b2 * d1 - b1 * d2) / den + N[:, 1] * (a1 * d2 - a2 * d1) / den
        E = T_A + N[:, 0] * (b2 * c1 - b1 * c2) / den + N[:, 1] * (a1 * c2 - a2 * c1) / den
        return D, E

    D, E = line(N)
    if D.sum() < 0:
        N[:, 2] = -N[:, 2]
        D, E = line(N)
    return LambdaReduction(D, E, a1, b1, c1, a2, b2, c2, N, T_A)


def reduction_closed_form(T_A, N_A, geometry: CableGeometry, params: RobotParams, L0=None):
    """Expanded closed-form D_A and E_A, written out term by term.

    Kept as an independent cross-check of the substitution in
    ``lambda_reduction``.
    """
    TA = np.asarray(T_A, dtype=float)
    N = np.asarray(N_A, dtype=float)
    L = np.asarray(geometry.lengths, dtype=float)
    L0 = L if L0 is None else np.asarray(L0, dtype=float)
    k1, k5 = params.K_s / L0[0], params.K_s / L0[4]
    n = lambda i, j: N[i - 1, j - 1]  # noqa: E731  1-based like the printed forms
    den = (n(1, 1) - n(2, 1)) * (n(5, 2) - n(6, 2)) - (n(1, 2) - n(2, 2)) * (n(5, 1) - n(6, 1))
    g1 = (n(1, 1) - n(2, 1)) * (n(5, 3) - n(6, 3)) - (n(1, 3) - n(2, 3)) * (n(5, 1) - n(6, 1))
    g2 = (n(1, 2) - n(2, 2)) * (n(5, 3) - n(6, 3)) - (n(1, 3) - n(2, 3)) * (n(5, 2) - n(6, 2))
    r5 = TA[5] - TA[4] + k5 * (L[4] - L[5])
    r1 = TA[1] - TA[0] + k1 * (L[0] - L[1])
    D = np.empty(6)
    E = np.empty(6)
    for i in range(1, 7):
        D[i - 1] = n(i, 3) - n(i, 2) * g1 / den + n(i, 1) * g2 / den
        E[i - 1] = (
            TA[i - 1]
            + n(i, 2) * (n(1, 1) - n(2, 1)) * r5 / den
            - n(i, 2) * (n(5, 1) - n(6, 1)) * r1 / den
            - n(i, 1) * (n(1, 2) - n(2, 2)) * r5 / den
            + n(i, 1) * (n(5, 2) - n(6, 2)) * r1 / den
        )
    return D, E


@njit(cache=True)
def lambda3_interval(D, E, T_min, T_max):
    """Feasible lambda_3 interval and the cables that set each end.

    Returns (lo, hi, lo_cable, hi_cable, bad_cable). ``bad_cable`` is the
    first cable with D = 0 whose fixed tension is out of bounds, or -1.
    """
    lo, hi = -np.inf, np.inf
    lo_i, hi_i, bad = -1, -1, -1
    for i in range(6):
        d = D[i]
        if abs(d) < 1e-14:
            if (E[i] < T_min or E[i] > T_max) and bad < 0:
                bad = i
            continue
        a = (T_min - E[i]) / d
        b = (T_max - E[i]) / d
        if d < 0:
            a, b = b, a
        if a > lo:
            lo, lo_i = a, i
        if b < hi:
            hi, hi_i = b, i
    return lo, hi, lo_i, hi_i, bad


def cable_intervals(D, E, T_min: float, T_max: float) -> list[tuple[float, float]]:
    """Per-cable lambda_3 intervals keeping that cable within bounds."""
    out = []
    for d, e in zip(D, E):
        if abs(d) < 1e-14:
            ok = T_min <= e <= T_max
            out.append((-math.inf, math.inf) if ok else (math.inf, -math.inf))
            continue
        a, b = (T_min - e) / d, (T_max - e) / d
        out.append((min(a, b), max(a, b)))
    return out


def maximize_lambda3(reduction: LambdaReduction, params: RobotParams) -> tuple[float, np.ndarray]:
    """Largest lambda_3 keeping every tension in [T_min, T_max]."""
    D = np.ascontiguousarray(reduction.D_A, dtype=float)
    E = np.ascontiguousarray(reduction.E_A, dtype=float)
    lo, hi, lo_i, hi_i, bad = lambda3_interval(D, E, params.T_min, params.T_max)
    if bad >= 0 or lo > hi:
        cables = sorted({i + 1 for i in (lo_i, hi_i, bad) if i >= 0})
        raise InfeasibleTensionError(
            f"no lambda_3 keeps all tensions in [{params.T_min}, {params.T_max}] N; "
            f"conflicting cables {cables}",
            cables,
            cable_intervals(D, E, params.T_min, params.T_max),
        )
    if not math.isfinite(hi):
        raise InfeasibleTensionError("lambda_3 is unbounded above; tension line is degenerate", [])
    T = np.clip(hi * D + E, params.T_min, params.T_max)
    return float(hi), T


def optimal_tensions(
    q,
    params: RobotParams,
    external: Wrench | None = None,
    W_m=None,
    L0=None,
    include_arm: bool = True,
) -> TensionSolution:
    """Stiffest admissible tension distribution holding the platform at ``q``."""
    geometry = cable_geometry(q, params)
    A = geometry.structure_matrix
    W = static_wrench(params, external, q, include_arm) if W_m is None else np.asarray(W_m, dtype=float)
    T_A = particular_solution(A, W)
    N_A = null_basis(A)
    red = lambda_reduction(T_A, N_A, geometry, params, L0)
    lam3, T = maximize_lambda3(red, params)
    lengths = geometry.lengths
    L0_out = lengths * params.K_s / (params.K_s + T)
    L0_out[2:4] = np.nan
    redundancy = RedundancySolution(T_A=T_A, N_A=red.N_A, lam=red.lambdas(lam3), T=T)
    return TensionSolution(A=A, W_m=W, redundancy=redundancy, reduction=red, lambda3=lam3, T=T, L0=L0_out)


# --------------------------------------------------------------------------
# compiled path used inside the control loop
# --------------------------------------------------------------------------


@njit(cache=True)
def distribute_kernel(q, p, W):
    """Optimal tensions for wrench ``W`` at ``q`` with L0 = current lengths.

    Returns (T, lambda3, lengths, status); status is 0 when feasible, 1 when
    the interval was empty and the tensions were saturated, 2 when the
    elimination is degenerate.
    """
    T_min, T_max, K_s = p[20], p[21], p[22]
    _, _, length, _, A = cable_kernel(q, p)
    T_A = A.T @ np.linalg.solve(A @ A.T, W)
    N = _kernel_basis(A)
    k1 = K_s / length[0]
    k5 = K_s / length[4]
    a1, b1, c1, a2, b2, c2 = _elimination(T_A, N, length, k1, k5)
    den = a1 * b2 - a2 * b1
    T = np.empty(6)
    if abs(den) < DEGENERACY_TOL:
        for i in range(6):
            T[i] = min(max(T_A[i], T_min), T_max)
        return T, 0.0, length, 2
    d1 = N[1, 2] - N[0, 2]
    d2 = N[5, 2] - N[4, 2]
    D = N[:, 2] + N[:, 0] * (b2 * d1 - b1 * d2) / den + N[:, 1] * (a1 * d2 - a2 * d1) / den
    E = T_A + N[:, 0] * (b2 * c1 - b1 * c2) / den + N[:, 1] * (a1 * c2 - a2 * c1) / den
    if D.sum() < 0:
        D = -D
    lo, hi, _, _, bad = lambda3_interval(D, E, T_min, T_max)
    status = 0
    if bad >= 0 or lo > hi or not math.isfinite(hi):
        status = 1
        if math.isfinite(lo) and math.isfinite(hi):
            lam = 0.5 * (lo + hi)
        elif math.isfinite(lo):
            lam = lo
        elif math.isfinite(hi):
            lam = hi
        else:
            lam = 0.0
    else:
        lam = hi
    for i in range(6):
        T[i] = min(max(lam * D[i] + E[i], T_min), T_max)
    return T, lam, length, status


def distribute(q, params: RobotParams, W) -> tuple[np.ndarray, float, int]:
    """Fast optimal distribution; saturates instead of raising."""
    T, lam, _, status = distribute_kernel(
        np.ascontiguousarray(q, dtype=float), params.as_array(), np.ascontiguousarray(W, dtype=float)
    )
    return T, float(lam), int(status)
