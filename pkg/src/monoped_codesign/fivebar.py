"""Kinematics of the symmetric planar five-bar leg.

Base frame: x forward, z up, origin at the base centre.  The hips sit at
``(-l3/2, 0)`` and ``(+l3/2, 0)``; hip angles are measured from the base
x-axis, counter-clockwise positive, so a link hanging straight down has
``theta = -pi/2``.

Of the two foot solutions the leg works in the one lying to the right of the
directed line ``knee_l -> knee_r``.  For ordinary poses (knees outward, foot
below the knees) that is the lower intersection.  Keying the branch to the
knee line rather than to the smaller z keeps the solution continuous when the
knee line tilts steeply.

The ``_``-prefixed functions are numba kernels shared with the simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

CLOSURE_SINGULAR_TOL = 1e-10  # |det| of the closure derivative, m^2
_COINCIDENT_TOL = 1e-12

FK_OK, FK_UNREACHABLE, FK_DEGENERATE = 0, 1, 2


class KinematicsError(ValueError):
    pass


class UnreachableError(KinematicsError):
    pass


class DegenerateError(KinematicsError):
    pass


class SingularityError(KinematicsError):
    pass


@njit(cache=True)
def _fk(l1, l2, l3, th_l, th_r):
    """Returns (status, px, pz, klx, klz, krx, krz)."""
    ul_x, ul_z = math.cos(th_l), math.sin(th_l)
    ur_x, ur_z = math.cos(th_r), math.sin(th_r)
    klx = -0.5 * l3 + l1 * ul_x
    klz = l1 * ul_z
    krx = 0.5 * l3 + l1 * ur_x
    krz = l1 * ur_z
    dx = krx - klx
    dz = krz - klz
    dist = math.sqrt(dx * dx + dz * dz)
    if dist < _COINCIDENT_TOL:
        # coincident knees: only the fully stretched, overlapping case is unambiguous
        if l3 < _COINCIDENT_TOL and abs(ul_x - ur_x) + abs(ul_z - ur_z) < 1e-12:
            return FK_OK, klx + l2 * ul_x, klz + l2 * ul_z, klx, klz, krx, krz
        return FK_DEGENERATE, 0.0, 0.0, klx, klz, krx, krz
    half = 0.5 * dist
    if half > l2:
        return FK_UNREACHABLE, 0.0, 0.0, klx, klz, krx, krz
    h = math.sqrt(max(l2 * l2 - half * half, 0.0))
    nx = dz / dist
    nz = -dx / dist
    px = 0.5 * (klx + krx) + h * nx
    pz = 0.5 * (klz + krz) + h * nz
    return FK_OK, px, pz, klx, klz, krx, krz


@njit(cache=True)
def _jacobian(l1, th_l, th_r, px, pz, klx, klz, krx, krz, J):
    """Fill ``J = d foot / d theta`` in place and return det of the closure derivative."""
    a00 = px - klx
    a01 = pz - klz
    a10 = px - krx
    a11 = pz - krz
    det = a00 * a11 - a01 * a10
    b0 = l1 * (-a00 * math.sin(th_l) + a01 * math.cos(th_l))
    b1 = l1 * (-a10 * math.sin(th_r) + a11 * math.cos(th_r))
    if abs(det) < CLOSURE_SINGULAR_TOL:
        J[:, :] = 0.0
        return det
    inv = 1.0 / det
    J[0, 0] = a11 * b0 * inv
    J[0, 1] = -a01 * b1 * inv
    J[1, 0] = -a10 * b0 * inv
    J[1, 1] = a00 * b1 * inv
    return det


@njit(cache=True)
def _foot_bias(l1, th_l, th_r, dth_l, dth_r, px, pz, klx, klz, krx, krz, vpx, vpz, det):
    """Foot acceleration at zero joint acceleration (velocity-product terms)."""
    ul_x, ul_z = math.cos(th_l), math.sin(th_l)
    ur_x, ur_z = math.cos(th_r), math.sin(th_r)
    vklx, vklz = -l1 * ul_z * dth_l, l1 * ul_x * dth_l
    vkrx, vkrz = -l1 * ur_z * dth_r, l1 * ur_x * dth_r
    a00, a01 = px - klx, pz - klz
    a10, a11 = px - krx, pz - krz
    rel_l = (vpx - vklx) ** 2 + (vpz - vklz) ** 2
    rel_r = (vpx - vkrx) ** 2 + (vpz - vkrz) ** 2
    c0 = -l1 * dth_l * dth_l * (a00 * ul_x + a01 * ul_z) - rel_l
    c1 = -l1 * dth_r * dth_r * (a10 * ur_x + a11 * ur_z) - rel_r
    inv = 1.0 / det
    return (a11 * c0 - a01 * c1) * inv, (-a10 * c0 + a00 * c1) * inv


@dataclass(frozen=True)
class LegGeometry:
    l1: float
    l2: float
    l3: float

    def __post_init__(self):
        if not (self.l1 > 0 and self.l2 > 0):
            raise ValueError(f"link lengths must be positive: l1={self.l1}, l2={self.l2}")
        if self.l3 < 0:
            raise ValueError(f"hip separation cannot be negative: l3={self.l3}")
        if not 2 * (self.l1 + self.l2) > self.l3:
            raise ValueError("hip separation exceeds the reach of both chains")

    def hips(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return (-self.l3 / 2, 0.0), (self.l3 / 2, 0.0)


@dataclass(frozen=True)
class LegState:
    theta_l: float
    theta_r: float
    foot: tuple[float, float]
    knee_l: tuple[float, float]
    knee_r: tuple[float, float]

    def closure_residual(self, geom: LegGeometry) -> float:
        fx, fz = self.foot
        return max(abs(math.hypot(fx - kx, fz - kz) - geom.l2) for kx, kz in (self.knee_l, self.knee_r))


@dataclass(frozen=True)
class VirtualLegCoords:
    l: float
    alpha: float
    l_dot: float = 0.0
    alpha_dot: float = 0.0


def forward_kinematics(geom: LegGeometry, theta_l: float, theta_r: float) -> LegState:
    status, px, pz, klx, klz, krx, krz = _fk(geom.l1, geom.l2, geom.l3, float(theta_l), float(theta_r))
    if status == FK_UNREACHABLE:
        raise UnreachableError(f"distal links cannot close at theta=({theta_l:.4f}, {theta_r:.4f})")
    if status == FK_DEGENERATE:
        raise DegenerateError(f"knees coincide at theta=({theta_l:.4f}, {theta_r:.4f}); foot is ambiguous")
    return LegState(float(theta_l), float(theta_r), (px, pz), (klx, klz), (krx, krz))


def _two_link_angle(hip_x: float, fx: float, fz: float, l1: float, l2: float, outward: float) -> float:
    rx, rz = fx - hip_x, fz
    dist = math.hypot(rx, rz)
    if dist > l1 + l2 + 1e-12 or dist < abs(l1 - l2) - 1e-12 or dist == 0.0:
        raise UnreachableError(f"foot ({fx:.4f}, {fz:.4f}) out of reach of the hip at x={hip_x:.4f}")
    cos_b = (l1 * l1 + dist * dist - l2 * l2) / (2 * l1 * dist)
    beta = math.acos(min(1.0, max(-1.0, cos_b)))
    return math.atan2(rz, rx) + outward * beta


def inverse_kinematics(geom: LegGeometry, foot: tuple[float, float]) -> tuple[float, float]:
    """Hip angles placing the foot at ``foot`` (base frame) with both knees outward."""
    fx, fz = float(foot[0]), float(foot[1])
    if not fz < 0:
        raise UnreachableError(f"foot must be below the hips, got z={fz}")
    th_l = _two_link_angle(-geom.l3 / 2, fx, fz, geom.l1, geom.l2, -1.0)
    th_r = _two_link_angle(geom.l3 / 2, fx, fz, geom.l1, geom.l2, +1.0)
    try:
        state = forward_kinematics(geom, th_l, th_r)
    except KinematicsError as exc:
        raise UnreachableError(f"foot ({fx:.4f}, {fz:.4f}): {exc}") from exc
    err = math.hypot(state.foot[0] - fx, state.foot[1] - fz)
    if err > 1e-7 * max(1.0, geom.l1 + geom.l2):
        raise UnreachableError(f"foot ({fx:.4f}, {fz:.4f}) needs the other assembly mode of the leg")
    return th_l, th_r


def jacobian(geom: LegGeometry, state: LegState) -> np.ndarray:
    """``d foot / d (theta_l, theta_r)`` from implicit differentiation of the loop closure.

    Raises :class:`SingularityError` when the closure derivative is singular
    (distal links aligned) or a chain is fully stretched or folded, where the
    Jacobian loses rank.
    """
    J = np.zeros((2, 2))
    det = _jacobian(geom.l1, state.theta_l, state.theta_r, *state.foot, *state.knee_l, *state.knee_r, J)
    if abs(det) < CLOSURE_SINGULAR_TOL:
        raise SingularityError(f"closure derivative singular (det={det:.3e})")
    if abs(np.linalg.det(J)) < CLOSURE_SINGULAR_TOL:
        raise SingularityError("a chain is at full extension or fold; Jacobian rank-deficient")
    return J


def virtual_coords(state: LegState, J: np.ndarray | None = None,
                   theta_dot: tuple[float, float] = (0.0, 0.0)) -> VirtualLegCoords:
    """Virtual leg length and angle; rates need the Jacobian and hip rates."""
    fx, fz = state.foot
    l = math.hypot(fx, fz)
    if l == 0.0:
        raise DegenerateError("foot at the base centre: leg angle undefined")
    alpha = math.atan2(fx, -fz)
    if J is None:
        if any(theta_dot):
            raise ValueError("joint rates given without a Jacobian")
        return VirtualLegCoords(l, alpha)
    vx, vz = np.asarray(J) @ np.asarray(theta_dot, dtype=float)
    return VirtualLegCoords(l, alpha, (fx * vx + fz * vz) / l, (fx * vz - fz * vx) / (l * l))
