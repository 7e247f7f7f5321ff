"""Virtual spring-damper jumping controller.

A linear spring-damper along the virtual leg (base centre to foot) and a
torsional spring on the leg angle give a desired foot force, which the leg
Jacobian maps to hip torques.  The actuators deliver ``eta * tau`` clamped to
their peak output torque.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .motors import ActuatorSpec

# Optimizer box for the gains.  Not enforced on construction so that probes
# such as a passive leg (K = T = 0) remain expressible.
GAIN_BOUNDS = {
    "K": (50.0, 1000.0),
    "C": (0.0, 10.0),
    "T": (10.0, 50.0),
    "l0": (0.0, 10.0),
    "alpha0": (-math.pi / 2, math.pi / 2),
}


@dataclass(frozen=True)
class ControlParams:
    K: float  # N/m
    C: float  # N s/m
    T: float  # N m/rad
    l0: float  # m
    alpha0: float  # rad

    def __post_init__(self):
        for name in GAIN_BOUNDS:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def bound_violations(self) -> list[str]:
        out = []
        for name, (lo, hi) in GAIN_BOUNDS.items():
            v = getattr(self, name)
            if not lo <= v <= hi:
                out.append(f"{name}={v} outside [{lo:g}, {hi:g}]")
        return out

    def within_bounds(self) -> bool:
        return not self.bound_violations()


@dataclass(frozen=True)
class TorqueCommand:
    tau_l: float
    tau_r: float
    applied_l: float
    applied_r: float


def linear_force(params: ControlParams, l: float, l_dot: float) -> float:
    return params.K * (params.l0 - l) - params.C * l_dot


def torsional_torque(params: ControlParams, alpha: float) -> float:
    return params.T * (params.alpha0 - alpha)


@njit(cache=True)
def _ground_forces(F_l, tau_t, l, alpha):
    ca, sa = math.cos(alpha), math.sin(alpha)
    tang = tau_t / l
    return -F_l * sa - tang * ca, -F_l * ca + tang * sa


def ground_forces(F_l: float, tau_t: float, l: float, alpha: float) -> tuple[float, float]:
    """World-frame foot force ``(F_x, F_z)`` from the virtual spring outputs."""
    if not l > 0:
        raise ValueError(f"virtual leg length must be positive, got {l}")
    return _ground_forces(float(F_l), float(tau_t), float(l), float(alpha))


def hip_torques(J, F) -> tuple[float, float]:
    tau = np.asarray(J, dtype=float).T @ np.asarray(F, dtype=float)
    return float(tau[0]), float(tau[1])


@njit(cache=True)
def _saturate(tau, eta, peak):
    out = eta * tau
    if out > peak:
        return peak
    if out < -peak:
        return -peak
    return out


def apply_actuators(tau: tuple[float, float], act_l: ActuatorSpec, act_r: ActuatorSpec) -> TorqueCommand:
    applied_l = _saturate(float(tau[0]), act_l.efficiency, act_l.peak_output_torque)
    applied_r = _saturate(float(tau[1]), act_r.efficiency, act_r.peak_output_torque)
    return TorqueCommand(float(tau[0]), float(tau[1]), applied_l, applied_r)


def command(params: ControlParams, J, l: float, l_dot: float, alpha: float,
            act_l: ActuatorSpec, act_r: ActuatorSpec) -> TorqueCommand:
    """Full stance-phase pipeline from virtual leg state to applied torques."""
    F = ground_forces(linear_force(params, l, l_dot), torsional_torque(params, alpha), l, alpha)
    return apply_actuators(hip_torques(J, F), act_l, act_r)
