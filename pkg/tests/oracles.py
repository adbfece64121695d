"""Independent reference computations used by the test suite.

Nothing here imports the closed-form kernels under test. Positions are
written out again from scratch and differentiated numerically (complex step
for first derivatives, central differences on top of that).
"""

from __future__ import annotations

import numpy as np
from numba import njit

CSTEP = 1e-30


def body_positions(q, P):
    """COM positions (platform, link 1, link 2) and absolute body angles.

    Works with complex ``q`` so it can be complex-step differentiated.
    """
    x, z, th, t1, t2 = q
    a0 = th + np.pi / 2
    a1 = a0 + t1
    a2 = a1 + t2
    base = np.array([x + P.l_m * np.cos(a0), z + P.l_m * np.sin(a0)])
    c1 = base + P.l_c1 * np.array([np.cos(a1), np.sin(a1)])
    elbow = base + P.l_1 * np.array([np.cos(a1), np.sin(a1)])
    c2 = elbow + P.l_c2 * np.array([np.cos(a2), np.sin(a2)])
    return [np.array([x, z]), c1, c2], [th, th + t1, th + t1 + t2]


def _jac(f, q):
    q = np.asarray(q, dtype=complex)
    cols = []
    for k in range(5):
        dq = q.copy()
        dq[k] += 1j * CSTEP
        cols.append(np.imag(f(dq)) / CSTEP)
    return np.stack(cols, axis=-1)


def mass_matrix(q, P):
    masses = [P.m_m, P.m_1, P.m_2]
    inertias = [P.I_m, P.I_1, P.I_2]
    M = np.zeros((5, 5))
    for b in range(3):
        Jv = _jac(lambda qq: body_positions(qq, P)[0][b], q)
        Jw = _jac(lambda qq: np.array([body_positions(qq, P)[1][b]]), q)
        M += masses[b] * Jv.T @ Jv + inertias[b] * Jw.T @ Jw
    return M


def potential(q, P):
    pos, _ = body_positions(q, P)
    return P.g * (P.m_m * pos[0][1] + P.m_1 * pos[1][1] + P.m_2 * pos[2][1])


def gravity(q, P):
    return _jac(lambda qq: np.array([potential(qq, P)]), q)[0]


def coriolis_times_qdot(q, qd, P, h=1e-5):
    """``C(q, qd) qd = Mdot qd - dKE/dq`` by central differences of M."""
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    Mdot = (mass_matrix(q + h * qd, P) - mass_matrix(q - h * qd, P)) / (2 * h)
    dKE = np.empty(5)
    for k in range(5):
        e = np.zeros(5)
        e[k] = h
        dM = (mass_matrix(q + e, P) - mass_matrix(q - e, P)) / (2 * h)
        dKE[k] = 0.5 * qd @ dM @ qd
    return Mdot @ qd - dKE


# ---- cables, written in 3-D with the plane at y = 0 ----------------------


def _rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def frame_points(P):
    a, f, g, h = P.l_e / 2, P.l_f / 2, P.l_g, P.l_h
    return np.array([
        [a - g, 0, f], [a, 0, f - h], [a, 0, -f], [-a, 0, -f], [-a, 0, f - h], [-a + g, 0, f],
    ])


def body_points(P):
    return np.array([
        [P.l_b / 2, 0, P.l_m], [P.l_a / 2, 0, P.l_m - P.l_c], [P.l_d / 2, 0, P.l_m - P.l_bd],
        [-P.l_d / 2, 0, P.l_m - P.l_bd], [-P.l_a / 2, 0, P.l_m - P.l_c], [-P.l_b / 2, 0, P.l_m],
    ])


def newton_euler_resultant(pose, T, P):
    """Force and moment of the cable pulls on the platform, about its centre.

    Returned as (F_x, F_z, M) with M measured in the +x -> +z sense, which
    is a rotation about -y.
    """
    x, z, th = pose
    R = _rot_y(-th)  # +x toward +z
    centre = np.array([x, 0.0, z])
    F = np.zeros(3)
    Mo = np.zeros(3)
    for e, b, t in zip(frame_points(P), body_points(P), T):
        r = R @ b
        v = e - centre - r
        f = t * v / np.linalg.norm(v)
        F += f
        Mo += np.cross(r, f)
    return np.array([F[0], F[2], -Mo[1]])


def spring_wrench(pose, L0, T34, P):
    """Platform wrench with cables 1, 2, 5, 6 as springs of fixed rest length."""
    x, z, th = pose
    R = _rot_y(-th)
    T = np.empty(6)
    for i, (e, b) in enumerate(zip(frame_points(P), body_points(P))):
        L = np.linalg.norm(e - np.array([x, 0.0, z]) - R @ b)
        T[i] = P.K_s / L0[i] * (L - L0[i]) if i in (0, 1, 4, 5) else T34[i - 2]
    return newton_euler_resultant(pose, T, P)


def fd_stiffness(pose, L0, T34, P, h=1e-6):
    K = np.zeros((3, 3))
    pose = np.asarray(pose, dtype=float)
    for j in range(3):
        d = np.zeros(3)
        d[j] = h
        K[:, j] = -(spring_wrench(pose + d, L0, T34, P) - spring_wrench(pose - d, L0, T34, P)) / (2 * h)
    return K


@njit(cache=True)
def grid_scan_lambda3(D, E, T_min, T_max, lo=-1e4, hi=1e4, step=1e-3):
    """Largest grid point in [lo, hi] keeping every tension in bounds; nan if none."""
    n = int(round((hi - lo) / step))
    for k in range(n, -1, -1):
        lam = lo + k * step
        ok = True
        for i in range(D.shape[0]):
            t = lam * D[i] + E[i]
            if t < T_min or t > T_max:
                ok = False
                break
        if ok:
            return lam
    return np.nan
