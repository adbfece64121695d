"""Planar kinematics: arm chain, cable geometry, Jacobian and inverse maps.

The plane is the XZ plane of the inertial frame. Generalized coordinates
are ``q = (x_m, z_m, theta_m, theta_1, theta_2)``. The arm base angle is
``theta_m + pi/2`` so that ``q = 0`` is the arm pointing straight up.

Platform rotation uses the same sense as the arm angles (positive turns +x
toward +z). The third row of the structure matrix is therefore the planar
moment ``r_x * u_z - r_z * u_x``, which is the generalized force conjugate
to ``theta_m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numba import njit

from .errors import DegenerateGeometryError, SingularConfigurationError, WorkspaceError
from .params import RobotParams

HALF_PI = 0.5 * math.pi
N_CABLES = 6


@dataclass(frozen=True)
class GeneralizedState:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(5)
        qd = np.zeros(5) if self.qdot is None else np.asarray(self.qdot, dtype=float).reshape(5)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
            raise ValueError("state must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qd)

    @classmethod
    def trusted(cls, q: np.ndarray, qdot: np.ndarray) -> "GeneralizedState":
        """Wrap float64 5-vectors without copying or checking (hot loops)."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "q", q)
        object.__setattr__(obj, "qdot", qdot)
        return obj

    @classmethod
    def at_rest(cls, q=None) -> "GeneralizedState":
        return cls(np.zeros(5) if q is None else q, np.zeros(5))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.q, self.qdot])


@dataclass(frozen=True)
class EndEffectorPose:
    x_e: float
    z_e: float
    q_e: float


@dataclass(frozen=True)
class LinkKinematics:
    p1: np.ndarray
    pc1: np.ndarray
    p2: np.ndarray
    pc2: np.ndarray
    vel_c1: np.ndarray
    vel_c2: np.ndarray

    @property
    def vc1(self) -> float:
        return float(np.hypot(*self.vel_c1))

    @property
    def vc2(self) -> float:
        return float(np.hypot(*self.vel_c2))


@dataclass(frozen=True)
class CableGeometry:
    """Per-cable vectors embedded in 3-D as (x, 0, z); rows are cables."""

    anchors_frame: np.ndarray
    anchors_platform: np.ndarray
    cable_vectors: np.ndarray
    lengths: np.ndarray
    unit_vectors: np.ndarray
    moment_arms: np.ndarray
    structure_matrix: np.ndarray


# --------------------------------------------------------------------------
# compiled kernels (params passed as RobotParams.as_array())
# --------------------------------------------------------------------------


@njit(cache=True)
def arm_points(q, p):
    """Rows: P1, Pc1, P2, Pc2, Pe (planar x, z)."""
    l_m, l_1, l_2, l_c1, l_c2 = p[9], p[10], p[11], p[12], p[13]
    a0 = q[2] + HALF_PI
    a1 = a0 + q[3]
    a2 = a1 + q[4]
    c0, s0 = math.cos(a0), math.sin(a0)
    c1, s1 = math.cos(a1), math.sin(a1)
    c2, s2 = math.cos(a2), math.sin(a2)
    out = np.empty((5, 2))
    x1 = q[0] + l_m * c0
    z1 = q[1] + l_m * s0
    x2 = x1 + l_1 * c1
    z2 = z1 + l_1 * s1
    out[0, 0], out[0, 1] = x1, z1
    out[1, 0], out[1, 1] = x1 + l_c1 * c1, z1 + l_c1 * s1
    out[2, 0], out[2, 1] = x2, z2
    out[3, 0], out[3, 1] = x2 + l_c2 * c2, z2 + l_c2 * s2
    out[4, 0], out[4, 1] = x2 + l_2 * c2, z2 + l_2 * s2
    return out


@njit(cache=True)
def com_velocities(q, qd, p):
    """Planar velocities of the two link centers of mass, rows c1, c2."""
    l_m, l_1, l_c1, l_c2 = p[9], p[10], p[12], p[13]
    a0 = q[2] + HALF_PI
    a1 = a0 + q[3]
    a2 = a1 + q[4]
    w0 = qd[2]
    w1 = w0 + qd[3]
    w2 = w1 + qd[4]
    out = np.empty((2, 2))
    out[0, 0] = qd[0] - l_c1 * w1 * math.sin(a1) - l_m * w0 * math.sin(a0)
    out[0, 1] = qd[1] + l_c1 * w1 * math.cos(a1) + l_m * w0 * math.cos(a0)
    out[1, 0] = qd[0] - l_1 * w1 * math.sin(a1) - l_m * w0 * math.sin(a0) - l_c2 * w2 * math.sin(a2)
    out[1, 1] = qd[1] + l_1 * w1 * math.cos(a1) + l_m * w0 * math.cos(a0) + l_c2 * w2 * math.cos(a2)
    return out


@njit(cache=True)
def frame_anchors(p):
    l_e, l_f, l_g, l_h = p[4], p[5], p[6], p[7]
    e = np.empty((6, 2))
    e[0, 0], e[0, 1] = l_e / 2 - l_g, l_f / 2
    e[1, 0], e[1, 1] = l_e / 2, l_f / 2 - l_h
    e[2, 0], e[2, 1] = l_e / 2, -l_f / 2
    e[3, 0], e[3, 1] = -l_e / 2, -l_f / 2
    e[4, 0], e[4, 1] = -l_e / 2, l_f / 2 - l_h
    e[5, 0], e[5, 1] = -l_e / 2 + l_g, l_f / 2
    return e


@njit(cache=True)
def platform_offsets(p):
    """Anchor offsets in the platform frame (before rotation)."""
    l_a, l_b, l_c, l_d, l_bd, l_m = p[0], p[1], p[2], p[3], p[8], p[9]
    b = np.empty((6, 2))
    b[0, 0], b[0, 1] = l_b / 2, l_m
    b[1, 0], b[1, 1] = l_a / 2, l_m - l_c
    b[2, 0], b[2, 1] = l_d / 2, l_m - l_bd
    b[3, 0], b[3, 1] = -l_d / 2, l_m - l_bd
    b[4, 0], b[4, 1] = -l_a / 2, l_m - l_c
    b[5, 0], b[5, 1] = -l_b / 2, l_m
    return b


@njit(cache=True)
def cable_kernel(q, p):
    """Moment arms, cable vectors, lengths, unit vectors and structure matrix."""
    e = frame_anchors(p)
    b = platform_offsets(p)
    c, s = math.cos(q[2]), math.sin(q[2])
    r = np.empty((6, 2))
    vec = np.empty((6, 2))
    length = np.empty(6)
    unit = np.empty((6, 2))
    A = np.empty((3, 6))
    for i in range(6):
        r[i, 0] = c * b[i, 0] - s * b[i, 1]
        r[i, 1] = s * b[i, 0] + c * b[i, 1]
        vec[i, 0] = e[i, 0] - q[0] - r[i, 0]
        vec[i, 1] = e[i, 1] - q[1] - r[i, 1]
        length[i] = math.hypot(vec[i, 0], vec[i, 1])
        unit[i, 0] = vec[i, 0] / length[i]
        unit[i, 1] = vec[i, 1] / length[i]
        A[0, i] = unit[i, 0]
        A[1, i] = unit[i, 1]
        A[2, i] = r[i, 0] * unit[i, 1] - r[i, 1] * unit[i, 0]
    return r, vec, length, unit, A


@njit(cache=True)
def jacobian_kernel(q, p):
    l_m, l_1, l_2 = p[9], p[10], p[11]
    a0 = q[2] + HALF_PI
    a1 = a0 + q[3]
    a2 = a1 + q[4]
    J = np.zeros((3, 5))
    J[0, 0] = 1.0
    J[1, 1] = 1.0
    J[0, 2] = -l_1 * math.sin(a1) - l_m * math.sin(a0) - l_2 * math.sin(a2)
    J[1, 2] = l_1 * math.cos(a1) + l_m * math.cos(a0) + l_2 * math.cos(a2)
    J[0, 3] = -l_1 * math.sin(a1) - l_2 * math.sin(a2)
    J[1, 3] = l_1 * math.cos(a1) + l_2 * math.cos(a2)
    J[0, 4] = -l_2 * math.sin(a2)
    J[1, 4] = l_2 * math.cos(a2)
    J[2, 2] = 1.0
    J[2, 3] = 1.0
    J[2, 4] = 1.0
    return J


# --------------------------------------------------------------------------
# public API
# --------------------------------------------------------------------------


def _q(q) -> np.ndarray:
    return np.ascontiguousarray(q, dtype=np.float64).reshape(5)


def _embed(v2: np.ndarray) -> np.ndarray:
    out = np.zeros((v2.shape[0], 3))
    out[:, 0] = v2[:, 0]
    out[:, 2] = v2[:, 1]
    return out


def forward_kinematics(q, params: RobotParams, qdot=None) -> tuple[EndEffectorPose, LinkKinematics]:
    q = _q(q)
    p = params.as_array()
    pts = arm_points(q, p)
    if qdot is None:
        vel = np.zeros((2, 2))
    else:
        vel = com_velocities(q, _q(qdot), p)
    pose = EndEffectorPose(pts[4, 0], pts[4, 1], q[2] + HALF_PI + q[3] + q[4])
    links = LinkKinematics(pts[0], pts[1], pts[2], pts[3], vel[0], vel[1])
    return pose, links


def cable_geometry(q, params: RobotParams) -> CableGeometry:
    q = _q(q)
    p = params.as_array()
    e = frame_anchors(p)
    r, vec, length, unit, A = cable_kernel(q, p)
    if np.any(length < 1e-12):
        bad = [int(i) + 1 for i in np.flatnonzero(length < 1e-12)]
        raise DegenerateGeometryError(f"zero-length cable(s) {bad}")
    return CableGeometry(
        anchors_frame=_embed(e),
        anchors_platform=_embed(r) + np.array([q[0], 0.0, q[1]]),
        cable_vectors=_embed(vec),
        lengths=length,
        unit_vectors=_embed(unit),
        moment_arms=_embed(r),
        structure_matrix=A,
    )


def cable_lengths(q, params: RobotParams) -> np.ndarray:
    return cable_kernel(_q(q), params.as_array())[2]


def jacobian(q, params: RobotParams) -> np.ndarray:
    return jacobian_kernel(_q(q), params.as_array())


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.remainder(a, 2 * math.pi)
    return math.pi if w == -math.pi else w


def inverse_platform(
    L1: float, L6: float, params: RobotParams, branch: Literal["lower", "upper"] = "lower"
) -> tuple[float, float, float]:
    """Platform position from the two constrained upper cable lengths.

    With L1 = L2 and L5 = L6 the platform cannot rotate, so cables 1 and 6
    and the baseline between their frame anchors form a triangle.
    """
    if branch not in ("lower", "upper"):
        raise ValueError(f"branch must be 'lower' or 'upper', got {branch!r}")
    p = params
    d = p.l_b - p.l_e + 2 * p.l_g  # minus the horizontal span between anchors 1 and 6
    x_m = (L1**2 - L6**2) / (2 * d)
    radicand = (L1 - L6 + d) * (L6 - L1 + d) * (L1 + L6 + d) * (L1 + L6 - d)
    if radicand < 0:
        raise WorkspaceError(f"cable lengths L1={L1}, L6={L6} violate the triangle inequality")
    height = math.sqrt(radicand) / (2 * abs(d))
    centre = p.l_f / 2 - p.l_m
    z_m = centre - height if branch == "lower" else centre + height
    return x_m, z_m, 0.0


def inverse_arm(
    p_e, platform, params: RobotParams, elbow: Literal["plus", "minus"] = "plus"
) -> tuple[float, float]:
    """Joint angles reaching ``p_e = (x_e, z_e)`` from a platform pose."""
    if elbow not in ("plus", "minus"):
        raise ValueError(f"elbow must be 'plus' or 'minus', got {elbow!r}")
    x_e, z_e = float(p_e[0]), float(p_e[1])
    x_m, z_m, theta_m = (float(v) for v in platform)
    l_1, l_2 = params.l_1, params.l_2
    base = theta_m + HALF_PI
    x_1 = x_m + params.l_m * math.cos(base)
    z_1 = z_m + params.l_m * math.sin(base)
    r = math.hypot(x_e - x_1, z_e - z_1)
    if r < 1e-12:
        raise SingularConfigurationError("target coincides with the shoulder; direction undefined")
    if r > l_1 + l_2 + 1e-12 or r < abs(l_1 - l_2) - 1e-12:
        raise WorkspaceError(f"target at distance {r:.6g} m is out of reach")
    phi = math.atan2(z_e - z_1, x_e - x_1)
    alpha = math.acos(min(1.0, max(-1.0, (r * r + l_1 * l_1 - l_2 * l_2) / (2 * r * l_1))))
    beta = math.acos(min(1.0, max(-1.0, (l_1 * l_1 + l_2 * l_2 - r * r) / (2 * l_1 * l_2))))
    sign = 1.0 if elbow == "plus" else -1.0
    theta_1 = phi - sign * alpha - base
    theta_2 = sign * (math.pi - beta)
    return wrap_angle(theta_1), wrap_angle(theta_2)
