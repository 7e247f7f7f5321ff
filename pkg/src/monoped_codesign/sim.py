"""Planar jump simulator for the five-bar monoped.

The reported coordinates are ``q = (x_b, z_b, theta_l, theta_r)``.  The base
translates without pitching and carries the chassis and both actuators as a
point mass at its origin.  The four links are uniform thin rods.

Internally the two lower-link angles are integrated as well, and the loop
closure is imposed by Lagrange multipliers, with positions and velocities
projected back onto it after every step.  The passive leg can then swing
through configurations where the distal links align in flight.  At those
configurations the hip angles alone no longer determine the foot.

Ground contact is a unilateral spring-damper with regularised Coulomb friction
at the foot.  A stance step updates velocities with the ground force solved
implicitly in the post-step foot velocity, then moves positions with the mean
of the old and new velocities.  This keeps the near-critical contact damping
stable for any effective foot mass.  Contact-free steps use classical RK4 and
then restore the horizontal momentum, since nothing acts horizontally in
flight.  Flight energy is conserved closely, and a ballistic base is
integrated exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .controller import ControlParams, _ground_forces, _saturate
from .fivebar import (CLOSURE_SINGULAR_TOL, KinematicsError, LegGeometry, _jacobian,
                      forward_kinematics, inverse_kinematics, jacobian)
from .motors import ActuatorSpec

GRAVITY = 9.81
DT = 1e-3
T_MAX = 3.0

STATUS_NAMES = ("completed", "no_liftoff", "timeout", "sim_failure")
COMPLETED, NO_LIFTOFF, TIMEOUT, SIM_FAILURE = range(4)

# layout of the packed design vector handed to the kernels
P_L1, P_L2, P_L3, P_MB, P_MUL, P_MUR, P_MLL, P_MLR, P_G, P_ETAL, P_ETAR, P_PKL, P_PKR = range(13)
P_KG, P_CG, P_MU, P_VSLIP = range(13, 17)
N_PARAMS = 17

LOG_COLUMNS = ("time", "x_b", "z_b", "theta_l", "theta_r", "xd_b", "zd_b", "omega_l", "omega_r",
               "tau_l", "tau_r", "applied_l", "applied_r", "foot_x", "foot_z", "contact", "F_n", "F_t",
               "closure_residual", "phi_l", "phi_r", "phid_l", "phid_r")
_LC = {name: i for i, name in enumerate(LOG_COLUMNS)}
CSV_COLUMNS = ("time", "x_b", "z_b", "theta_l", "theta_r", "omega_l", "omega_r", "tau_l", "tau_r",
               "foot_x", "foot_z", "contact", "F_n")


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ContactParams:
    stiffness_per_kg: float = 5000.0  # k_g = this * total mass, N/m
    damping_ratio: float = 1.0  # c_g = 2 * ratio * sqrt(k_g * total mass)
    friction: float = 0.8
    slip_speed: float = 1e-3  # m/s, viscous regularisation below this

    def __post_init__(self):
        if not (self.stiffness_per_kg > 0 and self.damping_ratio >= 0 and self.friction >= 0
                and self.slip_speed > 0):
            raise ValueError(f"invalid contact parameters: {self}")

    def gains(self, total_mass: float) -> tuple[float, float]:
        k = self.stiffness_per_kg * total_mass
        return k, 2.0 * self.damping_ratio * math.sqrt(k * total_mass)

    @classmethod
    def from_dict(cls, data: dict) -> ContactParams:
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class RobotDesign:
    geom: LegGeometry
    act_l: ActuatorSpec
    act_r: ActuatorSpec
    base_chassis_mass: float
    link_masses: tuple[float, float, float, float]  # upper_l, upper_r, lower_l, lower_r
    z0: float

    def __post_init__(self):
        object.__setattr__(self, "link_masses", tuple(float(m) for m in self.link_masses))
        if len(self.link_masses) != 4 or any(not m > 0 for m in self.link_masses):
            raise ValueError("need four positive link masses")
        if self.base_chassis_mass < 0:
            raise ValueError("chassis mass cannot be negative")
        if not 0 <= self.z0 <= self.geom.l1 + self.geom.l2 + 1e-12:
            raise ValueError(f"z0={self.z0} outside [0, l1 + l2]")

    @property
    def base_mass(self) -> float:
        return self.base_chassis_mass + self.act_l.total_mass + self.act_r.total_mass

    @property
    def total_mass(self) -> float:
        return self.base_mass + sum(self.link_masses)


@dataclass(frozen=True)
class SimState:
    """Simulator state.  ``passive`` holds the lower-link angles and rates; when
    omitted they are reconstructed from the hip angles in the working branch."""

    q: tuple[float, float, float, float]
    q_dot: tuple[float, float, float, float]
    time: float = 0.0
    in_contact: bool = False
    foot_world: tuple[float, float] = (0.0, 0.0)
    passive: tuple[float, float] | None = None
    passive_dot: tuple[float, float] | None = None


@dataclass
class Trajectory:
    data: np.ndarray  # one row per simulated step, columns LOG_COLUMNS

    def __len__(self):
        return len(self.data)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[:, _LC[name]]


@dataclass
class JumpResult:
    distance_x: float
    energy: float
    liftoff_time: float | None
    touchdown_time: float | None
    status: str
    trajectory: Trajectory | None = None
    steps: int = 0
    detail: str = ""

    @property
    def completed(self) -> bool:
        return self.status == "completed"


def pack_design(design: RobotDesign, contact: ContactParams = ContactParams()) -> np.ndarray:
    P = np.zeros(N_PARAMS)
    g = design.geom
    P[P_L1], P[P_L2], P[P_L3] = g.l1, g.l2, g.l3
    P[P_MB] = design.base_mass
    P[P_MUL], P[P_MUR], P[P_MLL], P[P_MLR] = design.link_masses
    P[P_G] = GRAVITY
    P[P_ETAL], P[P_ETAR] = design.act_l.efficiency, design.act_r.efficiency
    P[P_PKL], P[P_PKR] = design.act_l.peak_output_torque, design.act_r.peak_output_torque
    P[P_KG], P[P_CG] = contact.gains(design.total_mass)
    P[P_MU], P[P_VSLIP] = contact.friction, contact.slip_speed
    return P


def pack_control(params: ControlParams) -> np.ndarray:
    return np.array([params.K, params.C, params.T, params.l0, params.alpha0])


# ---------------------------------------------------------------- kernels
#
# Internal coordinates s = (x_b, z_b, theta_l, theta_r, phi_l, phi_r); phi_i is
# the absolute angle of lower link i.  The two closure equations
# foot_l(s) = foot_r(s) are enforced by Lagrange multipliers, and after each
# step the positions and velocities are projected back onto the constraint.


@njit(cache=True)
def _add_point(M, f, Jc, ax, az, m, g):
    n = M.shape[0]
    for a in range(n):
        ja0 = Jc[0, a]
        ja1 = Jc[1, a]
        if ja0 == 0.0 and ja1 == 0.0:
            continue
        for b in range(n):
            M[a, b] += m * (ja0 * Jc[0, b] + ja1 * Jc[1, b])
        f[a] -= m * (ja0 * ax + ja1 * (az + g))


@njit(cache=True)
def _model(s, sd, P, M, f, G, gam, Jf, Jc, kin):
    """Mass matrix, generalised force (gravity minus velocity terms), closure
    Jacobian ``G`` with its velocity term ``gam = dG/dt sd``, and the foot
    Jacobian ``Jf`` (left chain).

    ``kin`` receives foot (base frame), knees and the closure residual.
    """
    l1, l2, l3, g = P[P_L1], P[P_L2], P[P_L3], P[P_G]
    h1, h2 = 0.5 * l1, 0.5 * l2
    cl, sl = math.cos(s[2]), math.sin(s[2])
    cr, sr = math.cos(s[3]), math.sin(s[3])
    cpl, spl = math.cos(s[4]), math.sin(s[4])
    cpr, spr = math.cos(s[5]), math.sin(s[5])
    wl, wr, vl, vr = sd[2], sd[3], sd[4], sd[5]

    klx, klz = -0.5 * l3 + l1 * cl, l1 * sl
    krx, krz = 0.5 * l3 + l1 * cr, l1 * sr
    plx, plz = klx + l2 * cpl, klz + l2 * spl
    prx, prz = krx + l2 * cpr, krz + l2 * spr
    kin[0], kin[1] = plx, plz
    kin[2], kin[3], kin[4], kin[5] = klx, klz, krx, krz
    kin[6] = math.sqrt((plx - prx) ** 2 + (plz - prz) ** 2)

    M[:, :] = 0.0
    f[:] = 0.0
    Jc[:, :] = 0.0
    Jc[0, 0] = 1.0
    Jc[1, 1] = 1.0
    _add_point(M, f, Jc, 0.0, 0.0, P[P_MB], g)

    # upper links
    Jc[0, 2], Jc[1, 2] = -h1 * sl, h1 * cl
    _add_point(M, f, Jc, -h1 * cl * wl * wl, -h1 * sl * wl * wl, P[P_MUL], g)
    M[2, 2] += P[P_MUL] * l1 * l1 / 12.0
    Jc[0, 2], Jc[1, 2] = 0.0, 0.0
    Jc[0, 3], Jc[1, 3] = -h1 * sr, h1 * cr
    _add_point(M, f, Jc, -h1 * cr * wr * wr, -h1 * sr * wr * wr, P[P_MUR], g)
    M[3, 3] += P[P_MUR] * l1 * l1 / 12.0
    Jc[0, 3], Jc[1, 3] = 0.0, 0.0

    # lower links
    Jc[0, 2], Jc[1, 2] = -l1 * sl, l1 * cl
    Jc[0, 4], Jc[1, 4] = -h2 * spl, h2 * cpl
    ax = -l1 * cl * wl * wl - h2 * cpl * vl * vl
    az = -l1 * sl * wl * wl - h2 * spl * vl * vl
    _add_point(M, f, Jc, ax, az, P[P_MLL], g)
    M[4, 4] += P[P_MLL] * l2 * l2 / 12.0
    Jc[0, 2], Jc[1, 2], Jc[0, 4], Jc[1, 4] = 0.0, 0.0, 0.0, 0.0
    Jc[0, 3], Jc[1, 3] = -l1 * sr, l1 * cr
    Jc[0, 5], Jc[1, 5] = -h2 * spr, h2 * cpr
    ax = -l1 * cr * wr * wr - h2 * cpr * vr * vr
    az = -l1 * sr * wr * wr - h2 * spr * vr * vr
    _add_point(M, f, Jc, ax, az, P[P_MLR], g)
    M[5, 5] += P[P_MLR] * l2 * l2 / 12.0

    G[:, :] = 0.0
    G[0, 2], G[1, 2] = -l1 * sl, l1 * cl
    G[0, 4], G[1, 4] = -l2 * spl, l2 * cpl
    G[0, 3], G[1, 3] = l1 * sr, -l1 * cr
    G[0, 5], G[1, 5] = l2 * spr, -l2 * cpr
    gam[0] = -l1 * cl * wl * wl - l2 * cpl * vl * vl + l1 * cr * wr * wr + l2 * cpr * vr * vr
    gam[1] = -l1 * sl * wl * wl - l2 * spl * vl * vl + l1 * sr * wr * wr + l2 * spr * vr * vr

    Jf[:, :] = 0.0
    Jf[0, 0] = 1.0
    Jf[1, 1] = 1.0
    Jf[0, 2], Jf[1, 2] = -l1 * sl, l1 * cl
    Jf[0, 4], Jf[1, 4] = -l2 * spl, l2 * cpl


@njit(cache=True)
def _cholesky(M, L):
    n = M.shape[0]
    for i in range(n):
        for j in range(i + 1):
            acc = M[i, j]
            for k in range(j):
                acc -= L[i, k] * L[j, k]
            if i == j:
                if acc <= 0.0:
                    return False
                L[i, i] = math.sqrt(acc)
            else:
                L[i, j] = acc / L[j, j]
    return True


@njit(cache=True)
def _chol_solve(L, b, x):
    n = L.shape[0]
    for i in range(n):
        acc = b[i]
        for k in range(i):
            acc -= L[i, k] * x[k]
        x[i] = acc / L[i, i]
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for k in range(i + 1, n):
            acc -= L[k, i] * x[k]
        x[i] = acc / L[i, i]


@njit(cache=True)
def _dot(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


@njit(cache=True)
def _constraint_response(L, G, Y0, Y1, S):
    """``Y_k = M^-1 G_k`` and ``S = G M^-1 G^T``; returns det S."""
    _chol_solve(L, G[0], Y0)
    _chol_solve(L, G[1], Y1)
    S[0, 0] = _dot(G[0], Y0)
    S[0, 1] = _dot(G[0], Y1)
    S[1, 0] = S[0, 1]
    S[1, 1] = _dot(G[1], Y1)
    return S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]


@njit(cache=True)
def _remove_constraint_part(v, G, Y0, Y1, S, det, rhs0, rhs1):
    """v <- v + M^-1 G^T lam with lam chosen so that G v = (rhs0, rhs1)."""
    r0 = rhs0 - _dot(G[0], v)
    r1 = rhs1 - _dot(G[1], v)
    lam0 = (S[1, 1] * r0 - S[0, 1] * r1) / det
    lam1 = (-S[1, 0] * r0 + S[0, 0] * r1) / det
    for a in range(v.shape[0]):
        v[a] += Y0[a] * lam0 + Y1[a] * lam1


@njit(cache=True)
def _acceleration(s, sd, tau_l, tau_r, P, w, acc):
    """Constrained acceleration at (s, sd); returns 0 or a failure code."""
    M, L, f, G, gam, Jf, Jc, kin, Y0, Y1, S = w[0], w[1], w[2], w[3], w[4], w[5], w[6], w[7], w[8], w[9], w[10]
    _model(s, sd, P, M, f, G, gam, Jf, Jc, kin)
    if not _cholesky(M, L):
        return 4
    f[2] += tau_l
    f[3] += tau_r
    _chol_solve(L, f, acc)
    det = _constraint_response(L, G, Y0, Y1, S)
    if abs(det) < 1e-14:
        return 3
    _remove_constraint_part(acc, G, Y0, Y1, S, det, -gam[0], -gam[1])
    return 0


@njit(cache=True)
def _project(s, sd, P, w):
    """Pull positions and velocities back onto the closure manifold."""
    M, L, f, G, gam, Jf, Jc, kin, Y0, Y1, S = w[0], w[1], w[2], w[3], w[4], w[5], w[6], w[7], w[8], w[9], w[10]
    l1, l2, l3 = P[P_L1], P[P_L2], P[P_L3]
    for _ in range(10):
        cl, sl = math.cos(s[2]), math.sin(s[2])
        cr, sr = math.cos(s[3]), math.sin(s[3])
        cpl, spl = math.cos(s[4]), math.sin(s[4])
        cpr, spr = math.cos(s[5]), math.sin(s[5])
        c0 = -l3 + l1 * (cl - cr) + l2 * (cpl - cpr)
        c1 = l1 * (sl - sr) + l2 * (spl - spr)
        if abs(c0) + abs(c1) < 1e-13:
            break
        # minimum-norm correction of the four joint angles
        g0 = (-l1 * sl, l1 * sr, -l2 * spl, l2 * spr)
        g1 = (l1 * cl, -l1 * cr, l2 * cpl, -l2 * cpr)
        a00 = g0[0] * g0[0] + g0[1] * g0[1] + g0[2] * g0[2] + g0[3] * g0[3]
        a01 = g0[0] * g1[0] + g0[1] * g1[1] + g0[2] * g1[2] + g0[3] * g1[3]
        a11 = g1[0] * g1[0] + g1[1] * g1[1] + g1[2] * g1[2] + g1[3] * g1[3]
        det = a00 * a11 - a01 * a01
        if abs(det) < 1e-20:
            return 3
        m0 = (a11 * c0 - a01 * c1) / det
        m1 = (-a01 * c0 + a00 * c1) / det
        for k in range(4):
            s[2 + k] -= g0[k] * m0 + g1[k] * m1
    _model(s, sd, P, M, f, G, gam, Jf, Jc, kin)
    if not _cholesky(M, L):
        return 4
    det = _constraint_response(L, G, Y0, Y1, S)
    if abs(det) < 1e-14:
        return 3
    _remove_constraint_part(sd, G, Y0, Y1, S, det, 0.0, 0.0)
    for a in range(6):
        if not (math.isfinite(s[a]) and math.isfinite(sd[a])):
            return 5
    return 0


@njit(cache=True)
def _rk4_step(s, sd, tau_l, tau_r, P, dt, w, k):
    """Contact-free step (classical Runge-Kutta); ``k`` is (8, 6) scratch."""
    s1, v1, a1, s2, v2, a2, a3, a4 = k[0], k[1], k[2], k[3], k[4], k[5], k[6], k[7]
    st = _acceleration(s, sd, tau_l, tau_r, P, w, a1)
    if st:
        return st
    M = w[0]
    px0 = _dot(M[0], sd)
    for i in range(6):
        s1[i] = s[i] + 0.5 * dt * sd[i]
        v1[i] = sd[i] + 0.5 * dt * a1[i]
    st = _acceleration(s1, v1, tau_l, tau_r, P, w, a2)
    if st:
        return st
    for i in range(6):
        s2[i] = s[i] + 0.5 * dt * v1[i]
        v2[i] = sd[i] + 0.5 * dt * a2[i]
    st = _acceleration(s2, v2, tau_l, tau_r, P, w, a3)
    if st:
        return st
    for i in range(6):
        s1[i] = s[i] + dt * v2[i]
        s2[i] = sd[i] + dt * a3[i]  # reuse as the stage-4 velocity
    st = _acceleration(s1, s2, tau_l, tau_r, P, w, a4)
    if st:
        return st
    for i in range(6):
        s[i] += dt / 6.0 * (sd[i] + 2.0 * v1[i] + 2.0 * v2[i] + s2[i])
        sd[i] += dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i])
    st = _project(s, sd, P, w)
    if st:
        return st
    # nothing acts horizontally in flight: restore the horizontal momentum
    # through the base rate, which the closure does not involve
    sd[0] += (px0 - _dot(M[0], sd)) / M[0, 0]
    return 0


@njit(cache=True)
def _contact_solve(pen, vfx, vfz, Wxx, Wxz, Wzz, kg, cg, mu, vslip, dt):
    """Implicit spring-damper + regularised Coulomb force; returns (F_t, N).

    The damping and friction laws are evaluated at the post-step foot velocity
    ``v = v_free + dt W F``; Gauss-Seidel on the two components.
    """
    kp = kg * pen
    N = kp
    Ft = 0.0
    for _ in range(60):
        mn = mu * N
        a = vfx + dt * Wxz * N
        Ft = 0.0
        if mn > 0.0:
            Ft = min(mn, max(-mn, -mn * a / (vslip + mn * dt * Wxx)))
        b = vfz + dt * Wxz * Ft
        cand = (kp - cg * b) / (1.0 + cg * dt * Wzz)
        N_new = max(kp, cand)
        done = abs(N_new - N) <= 1e-12 * (1.0 + N)
        N = N_new
        if done:
            break
    mn = mu * N
    a = vfx + dt * Wxz * N
    Ft = 0.0
    if mn > 0.0:
        Ft = min(mn, max(-mn, -mn * a / (vslip + mn * dt * Wxx)))
    return Ft, N


@njit(cache=True)
def _contact_step(s, sd, tau_l, tau_r, P, dt, w, k, forces):
    """Stance step: explicit smooth forces, implicit ground force, trapezoidal positions."""
    M, L, f, G, gam, Jf, Jc, kin, Y0, Y1, S = w[0], w[1], w[2], w[3], w[4], w[5], w[6], w[7], w[8], w[9], w[10]
    acc, vnew, X0, X1 = k[0], k[1], k[2], k[3]
    st = _acceleration(s, sd, tau_l, tau_r, P, w, acc)
    if st:
        return st
    for i in range(6):
        vnew[i] = sd[i] + dt * acc[i]
    forces[0] = 0.0
    forces[1] = 0.0
    forces[2] = 0.0
    pen = -(s[1] + kin[1])
    if pen > 0.0:
        # constrained response of the generalised velocity to a unit foot force
        det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
        _chol_solve(L, Jf[0], X0)
        _remove_constraint_part(X0, G, Y0, Y1, S, det, 0.0, 0.0)
        _chol_solve(L, Jf[1], X1)
        _remove_constraint_part(X1, G, Y0, Y1, S, det, 0.0, 0.0)
        Wxx = _dot(Jf[0], X0)
        Wxz = _dot(Jf[0], X1)
        Wzz = _dot(Jf[1], X1)
        vfx = _dot(Jf[0], vnew)
        vfz = _dot(Jf[1], vnew)
        Ft, N = _contact_solve(pen, vfx, vfz, Wxx, Wxz, Wzz, P[P_KG], P[P_CG], P[P_MU], P[P_VSLIP], dt)
        for i in range(6):
            vnew[i] += dt * (X0[i] * Ft + X1[i] * N)
        forces[0] = Ft
        forces[1] = N
        forces[2] = 1.0
    for i in range(6):
        s[i] += 0.5 * dt * (sd[i] + vnew[i])
        sd[i] = vnew[i]
    return _project(s, sd, P, w)


@njit(cache=True)
def _step(s, sd, tau_l, tau_r, P, dt, w, k, forces):
    """One step: stance integrator if the foot is below ground, else RK4."""
    _model(s, sd, P, w[0], w[2], w[3], w[4], w[5], w[6], w[7])
    if -(s[1] + w[7][1]) > 0.0:
        return _contact_step(s, sd, tau_l, tau_r, P, dt, w, k, forces)
    forces[0] = 0.0
    forces[1] = 0.0
    forces[2] = 0.0
    return _rk4_step(s, sd, tau_l, tau_r, P, dt, w, k)


@njit(cache=True)
def _workspace():
    return (np.zeros((6, 6)), np.zeros((6, 6)), np.zeros(6), np.zeros((2, 6)), np.zeros(2),
            np.zeros((2, 6)), np.zeros((2, 6)), np.zeros(7), np.zeros(6), np.zeros(6), np.zeros((2, 2)))


@njit(cache=True)
def _energy(s, sd, P, w):
    M, f, G, gam, Jf, Jc, kin = w[0], w[2], w[3], w[4], w[5], w[6], w[7]
    _model(s, sd, P, M, f, G, gam, Jf, Jc, kin)
    ke = 0.0
    for a in range(6):
        for b in range(6):
            ke += 0.5 * sd[a] * M[a, b] * sd[b]
    l1, l2 = P[P_L1], P[P_L2]
    zb = s[1]
    kl, kr = l1 * math.sin(s[2]), l1 * math.sin(s[3])
    pe = P[P_MB] * zb
    pe += P[P_MUL] * (zb + 0.5 * kl) + P[P_MUR] * (zb + 0.5 * kr)
    pe += P[P_MLL] * (zb + kl + 0.5 * l2 * math.sin(s[4]))
    pe += P[P_MLR] * (zb + kr + 0.5 * l2 * math.sin(s[5]))
    return ke, pe * P[P_G]


@njit(cache=True)
def _stance_torques(s, sd, P, ctrl, w, J):
    """Controller output: (tau_l, tau_r) before and (applied_l, applied_r) after the actuators."""
    kin, Jf = w[7], w[5]
    px, pz = kin[0], kin[1]
    det = _jacobian(P[P_L1], s[2], s[3], px, pz, kin[2], kin[3], kin[4], kin[5], J)
    if abs(det) < CLOSURE_SINGULAR_TOL:
        return 0.0, 0.0, 0.0, 0.0
    # foot velocity relative to the base
    vpx = _dot(Jf[0], sd) - sd[0]
    vpz = _dot(Jf[1], sd) - sd[1]
    l = math.sqrt(px * px + pz * pz)
    if l == 0.0:
        return 0.0, 0.0, 0.0, 0.0
    alpha = math.atan2(px, -pz)
    ldot = (px * vpx + pz * vpz) / l
    F_l = ctrl[0] * (ctrl[3] - l) - ctrl[1] * ldot
    tau_t = ctrl[2] * (ctrl[4] - alpha)
    Fx, Fz = _ground_forces(F_l, tau_t, l, alpha)
    tau_l = J[0, 0] * Fx + J[1, 0] * Fz
    tau_r = J[0, 1] * Fx + J[1, 1] * Fz
    return tau_l, tau_r, _saturate(tau_l, P[P_ETAL], P[P_PKL]), _saturate(tau_r, P[P_ETAR], P[P_PKR])


@njit(cache=True)
def _rollout(P, ctrl, s0, sd0, dt, n_max, log, record):
    """Returns (status, steps, energy, liftoff_t, touchdown_t, distance)."""
    s = s0.copy()
    sd = sd0.copy()
    w = _workspace()
    k = np.zeros((8, 6))
    J = np.zeros((2, 2))
    forces = np.zeros(3)
    x_start = s[0]
    energy = 0.0
    touched = False
    airborne = False
    liftoff_t = -1.0
    touchdown_t = -1.0
    eta_l, eta_r = P[P_ETAL], P[P_ETAR]
    kin = w[7]
    for n in range(n_max):
        t = n * dt
        _model(s, sd, P, w[0], w[2], w[3], w[4], w[5], w[6], kin)
        contact = s[1] + kin[1] < 0.0
        if airborne and contact:
            return COMPLETED, n, energy, liftoff_t, t, s[0] - x_start
        if touched and not contact and not airborne:
            airborne = True
            liftoff_t = t
        if contact:
            touched = True
        if not airborne and s[1] <= 0.0:
            # base reached the ground: the leg collapsed
            return NO_LIFTOFF, n, energy, liftoff_t, touchdown_t, 0.0
        tau_l = tau_r = app_l = app_r = 0.0
        if contact:
            tau_l, tau_r, app_l, app_r = _stance_torques(s, sd, P, ctrl, w, J)
            # the energy account uses the delivered torque divided by eta
            tau_l = app_l / eta_l
            tau_r = app_r / eta_r
            if tau_l * sd[2] > 0.0:
                energy += eta_l * tau_l * sd[2] * dt
            if tau_r * sd[3] > 0.0:
                energy += eta_r * tau_r * sd[3] * dt
        if record:
            row = log[n]
            row[0] = t
            for a in range(4):
                row[1 + a] = s[a]
                row[5 + a] = sd[a]
            row[9], row[10], row[11], row[12] = tau_l, tau_r, app_l, app_r
            row[13] = s[0] + kin[0]
            row[14] = s[1] + kin[1]
            row[18] = kin[6]
            row[19], row[20] = s[4], s[5]
            row[21], row[22] = sd[4], sd[5]
        if contact:
            status = _contact_step(s, sd, app_l, app_r, P, dt, w, k, forces)
        else:
            forces[:] = 0.0
            status = _rk4_step(s, sd, app_l, app_r, P, dt, w, k)
        if record:
            log[n, 15] = forces[2]
            log[n, 16] = forces[1]
            log[n, 17] = forces[0]
        if status != 0:
            return SIM_FAILURE, n + 1, energy, liftoff_t, touchdown_t, 0.0
    if airborne:
        return TIMEOUT, n_max, energy, liftoff_t, touchdown_t, 0.0
    return NO_LIFTOFF, n_max, energy, liftoff_t, touchdown_t, 0.0


# ---------------------------------------------------------------- Python API


def _full_state(state: SimState, geom: LegGeometry) -> tuple[np.ndarray, np.ndarray]:
    s = np.zeros(6)
    sd = np.zeros(6)
    s[:4] = state.q
    sd[:4] = state.q_dot
    if state.passive is not None:
        s[4:] = state.passive
        sd[4:] = state.passive_dot if state.passive_dot is not None else (0.0, 0.0)
        return s, sd
    leg = forward_kinematics(geom, state.q[2], state.q[3])
    J = jacobian(geom, leg)
    vp = J @ np.asarray(state.q_dot[2:4], dtype=float)
    th = state.q[2:4]
    for i, (knee, w) in enumerate(((leg.knee_l, th[0]), (leg.knee_r, th[1]))):
        rx, rz = leg.foot[0] - knee[0], leg.foot[1] - knee[1]
        s[4 + i] = math.atan2(rz, rx)
        wi = state.q_dot[2 + i]
        vkx, vkz = -geom.l1 * math.sin(w) * wi, geom.l1 * math.cos(w) * wi
        sd[4 + i] = (rx * (vp[1] - vkz) - rz * (vp[0] - vkx)) / geom.l2**2
    return s, sd


def _public_state(s, sd, t, P) -> SimState:
    w = _workspace()
    _model(s, sd, P, w[0], w[2], w[3], w[4], w[5], w[6], w[7])
    kin = w[7]
    foot = (float(s[0] + kin[0]), float(s[1] + kin[1]))
    return SimState(tuple(map(float, s[:4])), tuple(map(float, sd[:4])), float(t), foot[1] < 0.0, foot,
                    (float(s[4]), float(s[5])), (float(sd[4]), float(sd[5])))


def initial_state(design: RobotDesign) -> SimState:
    """Base at height z0 with the foot on the ground directly below it, at rest."""
    th_l, th_r = inverse_kinematics(design.geom, (0.0, -design.z0))
    leg = forward_kinematics(design.geom, th_l, th_r)
    phi = tuple(math.atan2(leg.foot[1] - k[1], leg.foot[0] - k[0]) for k in (leg.knee_l, leg.knee_r))
    return SimState((0.0, design.z0, th_l, th_r), (0.0, 0.0, 0.0, 0.0), 0.0, False,
                    (leg.foot[0], design.z0 + leg.foot[1]), phi, (0.0, 0.0))


def step(state: SimState, applied_torques: Sequence[float], design: RobotDesign, dt: float = DT,
         contact: ContactParams = ContactParams()) -> SimState:
    """One integration step with the given delivered hip torques."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    P = pack_design(design, contact)
    s, sd = _full_state(state, design.geom)
    status = _step(s, sd, float(applied_torques[0]), float(applied_torques[1]), P, float(dt),
                   _workspace(), np.zeros((8, 6)), np.zeros(3))
    if status != 0:
        raise SimulationError(f"step failed (code {status})")
    return _public_state(s, sd, state.time + dt, P)


def contact_force(foot_world: Sequence[float], foot_velocity: Sequence[float], total_mass: float,
                  contact: ContactParams = ContactParams()) -> tuple[float, float, bool]:
    """Ground force on the foot, ``(F_x, F_z, in_contact)``, from the current foot state.

    The stance integrator applies the same law with the damping and friction
    terms evaluated at the post-step velocity.
    """
    k, c = contact.gains(total_mass)
    pen = max(0.0, -float(foot_world[1]))
    if pen <= 0.0:
        return 0.0, 0.0, False
    vx, vz = float(foot_velocity[0]), float(foot_velocity[1])
    N = max(0.0, k * pen + c * max(0.0, -vz))
    Ft = -contact.friction * N * max(-1.0, min(1.0, vx / contact.slip_speed))
    return Ft, N, True


def mechanical_energy(state: SimState, design: RobotDesign) -> tuple[float, float]:
    """(kinetic, gravitational potential) energy in J; potential is zero at z = 0."""
    s, sd = _full_state(state, design.geom)
    ke, pe = _energy(s, sd, pack_design(design), _workspace())
    return float(ke), float(pe)


def closure_residual(state: SimState, design: RobotDesign) -> float:
    s, sd = _full_state(state, design.geom)
    w = _workspace()
    _model(s, sd, pack_design(design), w[0], w[2], w[3], w[4], w[5], w[6], w[7])
    return float(w[7][6])


def rollout(design: RobotDesign, params: ControlParams, dt: float = DT, t_max: float = T_MAX,
            contact: ContactParams = ContactParams(), record: bool = True,
            initial: SimState | None = None) -> JumpResult:
    """Simulate one jump: stance under the controller, passive flight, stop at touchdown.

    Never raises for a physically bad design; problems come back as a status.
    """
    try:
        start = initial if initial is not None else initial_state(design)
    except KinematicsError as exc:
        return JumpResult(0.0, 0.0, None, None, "no_liftoff", None, 0, f"unreachable start: {exc}")
    P = pack_design(design, contact)
    s0, sd0 = _full_state(start, design.geom)
    n_max = int(round(t_max / dt))
    log = np.zeros((n_max if record else 1, len(LOG_COLUMNS)))
    status, n, energy, t_lift, t_touch, dist = _rollout(
        P, pack_control(params), s0, sd0, float(dt), n_max, log, record)
    if status != COMPLETED:
        dist = 0.0
    return JumpResult(
        distance_x=float(dist),
        energy=float(energy),
        liftoff_time=float(t_lift) if t_lift >= 0 else None,
        touchdown_time=float(t_touch) if t_touch >= 0 else None,
        status=STATUS_NAMES[status],
        trajectory=Trajectory(log[:n].copy()) if record else None,
        steps=int(n),
    )


def accumulate_energy(eta: Sequence[float], tau, omega, dt: float) -> float:
    """Consumed mechanical energy: sum of ``eta * tau * omega * dt`` over positive-power samples.

    ``tau`` and ``omega`` are (steps, 2) arrays for the left and right hips;
    ``tau`` is the joint torque before efficiency scaling (the log's tau columns).
    """
    tau = np.asarray(tau, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if tau.shape != omega.shape:
        raise ValueError(f"tau shape {tau.shape} does not match omega shape {omega.shape}")
    eta = np.asarray(eta, dtype=float)
    if tau.ndim != 2 or tau.shape[1] != len(eta):
        raise ValueError("expected one column per hip")
    power = tau * omega
    return float(np.sum(np.where(power > 0, eta * power * dt, 0.0)))


def trajectory_energy(result: JumpResult, design: RobotDesign, dt: float = DT) -> float:
    """Energy re-integrated from a recorded trajectory."""
    traj = result.trajectory
    tau = np.column_stack([traj["tau_l"], traj["tau_r"]])
    omega = np.column_stack([traj["omega_l"], traj["omega_r"]])
    return accumulate_energy((design.act_l.efficiency, design.act_r.efficiency), tau, omega, dt)


def write_trajectory_csv(path: str | Path, result: JumpResult) -> int:
    """Write the trajectory log; returns the number of data rows."""
    if result.trajectory is None:
        raise ValueError("rollout was run without recording")
    idx = [_LC[c] for c in CSV_COLUMNS]
    contact_col = CSV_COLUMNS.index("contact")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in result.trajectory.data[:, idx]:
            out = [repr(float(v)) for v in row]
            out[contact_col] = str(int(row[contact_col]))
            writer.writerow(out)
    return len(result.trajectory)
