"""Planetary gearbox synthesis for the hip actuators.

Three architectures are supported:

* SSPG: single-stage planetary; sun input, ring fixed, carrier output.
* CPG: compound planetary; the sun drives the large planet, the small planet
  (rigidly joined) meshes with the fixed ring, carrier output.
* WPG: Wolfrom / 3K planetary; sun input, stage-1 ring fixed, stage-2 ring
  output.

A design is the ten-vector ``X = [Ns1, Np1, Nr1, Ns2, Np2, Nr2, m1, m2, np1, np2]``
(teeth counts, modules in mm, planet counts).  Fields unused by an
architecture are zero.

The search enumerates every design that satisfies the geometric (concentric
centre-distance) equalities, screens the rest of the constraints with
vectorised copies of the scalar checkers, and picks the cost minimiser for
each requested ratio.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .motors import MotorSpec

MODULES = (0.5, 0.6, 0.8, 1.0, 1.2)  # mm
MODULE_MIN, MODULE_MAX = 0.5, 1.2
TEETH_MIN = 18  # undercutting limit for suns and planets
TEETH_MAX = 260
PLANETS_MIN, PLANETS_MAX = 2, 7
CARRIER_EXTRUSION_RADIUS = 4.0  # mm
CARRIER_CLEARANCE = 1.0  # mm

RATIO_GRID_MIN, RATIO_GRID_MAX, RATIO_GRID_STEP = 4.0, 35.0, 0.1
RATIO_TOLERANCE = 0.1  # accepted |GR - GR_req| window


class GearboxType(str, enum.Enum):
    SSPG = "SSPG"
    CPG = "CPG"
    WPG = "WPG"


TYPE_ORDER = (GearboxType.SSPG, GearboxType.CPG, GearboxType.WPG)


@dataclass(frozen=True)
class GearboxDesign:
    type: GearboxType
    Ns1: int
    Np1: int
    Nr1: int
    Ns2: int
    Np2: int
    Nr2: int
    m1: float
    m2: float
    np1: int
    np2: int

    def __post_init__(self):
        object.__setattr__(self, "type", GearboxType(self.type))
        teeth = (self.Ns1, self.Np1, self.Nr1, self.Ns2, self.Np2, self.Nr2, self.np1, self.np2)
        if any(int(t) != t or t < 0 for t in teeth):
            raise ValueError(f"teeth and planet counts must be non-negative integers: {teeth}")
        if self.m1 < 0 or self.m2 < 0:
            raise ValueError("modules must be non-negative")
        unused = {
            GearboxType.SSPG: ("Ns2", "Np2", "Nr2", "m2", "np2"),
            GearboxType.CPG: ("Nr1", "Ns2"),
            GearboxType.WPG: ("Ns2",),
        }[self.type]
        nonzero = [name for name in unused if getattr(self, name) != 0]
        if nonzero:
            raise ValueError(f"{self.type.value} must leave {', '.join(nonzero)} at zero")
        if self.type is not GearboxType.SSPG:
            if self.m1 != self.m2:
                raise ValueError(f"{self.type.value} requires m1 == m2")
            if self.np1 != self.np2:
                raise ValueError(f"{self.type.value} planets are rigidly joined: np1 must equal np2")

    @classmethod
    def sspg(cls, Ns: int, Np: int, Nr: int, n_planets: int, module: float) -> GearboxDesign:
        return cls(GearboxType.SSPG, Ns, Np, Nr, 0, 0, 0, module, 0.0, n_planets, 0)

    @classmethod
    def cpg(cls, Ns1: int, Np1: int, Np2: int, Nr2: int, n_planets: int, module: float) -> GearboxDesign:
        return cls(GearboxType.CPG, Ns1, Np1, 0, 0, Np2, Nr2, module, module, n_planets, n_planets)

    @classmethod
    def wpg(cls, Ns1: int, Np1: int, Nr1: int, Np2: int, Nr2: int, n_planets: int,
            module: float) -> GearboxDesign:
        return cls(GearboxType.WPG, Ns1, Np1, Nr1, 0, Np2, Nr2, module, module, n_planets, n_planets)

    @classmethod
    def from_vector(cls, gtype: GearboxType | str, X: Sequence[float]) -> GearboxDesign:
        Ns1, Np1, Nr1, Ns2, Np2, Nr2, m1, m2, np1, np2 = X
        return cls(GearboxType(gtype), int(Ns1), int(Np1), int(Nr1), int(Ns2), int(Np2), int(Nr2),
                   float(m1), float(m2), int(np1), int(np2))

    def as_vector(self) -> list[float]:
        return [self.Ns1, self.Np1, self.Nr1, self.Ns2, self.Np2, self.Nr2,
                self.m1, self.m2, self.np1, self.np2]


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    violations: tuple[str, ...] = ()

    def __bool__(self):
        return self.ok

    def __str__(self):
        return "ok" if self.ok else "; ".join(self.violations)


def _result(violations: list[str]) -> CheckResult:
    return CheckResult(not violations, tuple(violations))


def _exact(m: float) -> Fraction:
    # modules come from decimal literals such as 0.6
    return Fraction(str(m))


def gear_ratio(d: GearboxDesign) -> Fraction | None:
    """Exact input/output speed ratio, or ``None`` when a WPG is singular.

    A missing sun gear also yields ``None``.
    """
    if d.Ns1 == 0:
        return None
    stage1 = 1 + Fraction(d.Nr1, d.Ns1)
    if d.type is GearboxType.SSPG:
        return stage1
    if d.type is GearboxType.CPG:
        if d.Np2 == 0:
            return None
        return 1 + Fraction(d.Nr2 * d.Np1, d.Ns1 * d.Np2)
    denom = d.Np1 * d.Nr2
    if denom == 0 or d.Np1 * d.Nr2 == d.Nr1 * d.Np2:
        return None
    return stage1 / (1 - Fraction(d.Nr1 * d.Np2, denom))


def check_geometric(d: GearboxDesign) -> CheckResult:
    violations = []
    if d.type in (GearboxType.SSPG, GearboxType.WPG):
        if d.Nr1 != d.Ns1 + 2 * d.Np1:
            violations.append(f"Nr1 = {d.Nr1} != Ns1 + 2 Np1 = {d.Ns1 + 2 * d.Np1}")
    if d.type in (GearboxType.CPG, GearboxType.WPG):
        m1, m2 = _exact(d.m1), _exact(d.m2)
        lhs = m2 * d.Nr2
        rhs = m1 * (d.Ns1 + d.Np1) + m2 * d.Np2
        if lhs != rhs:
            violations.append(f"m2 Nr2 = {float(lhs)} != m1 (Ns1 + Np1) + m2 Np2 = {float(rhs)}")
        if d.type is GearboxType.WPG and not m2 * d.Nr2 < m1 * d.Nr1:
            violations.append(f"stage-2 ring ({float(m2 * d.Nr2)} mm) must be smaller than "
                              f"stage-1 ring ({float(m1 * d.Nr1)} mm)")
    return _result(violations)


def check_meshing(d: GearboxDesign) -> CheckResult:
    n = d.np1
    if n == 0:
        return _result(["no planets"])
    violations = []
    if d.type is GearboxType.SSPG:
        if (d.Ns1 + d.Nr1) % n:
            violations.append(f"(Ns1 + Nr1) % np1 = {(d.Ns1 + d.Nr1) % n}")
    else:
        if d.type is GearboxType.WPG and (d.Ns1 + d.Nr1) % n:
            violations.append(f"(Ns1 + Nr1) % np1 = {(d.Ns1 + d.Nr1) % n}")
        if d.Ns1 % n:
            violations.append(f"Ns1 % np1 = {d.Ns1 % n}")
        if d.Nr2 % n:
            violations.append(f"Nr2 % np1 = {d.Nr2 % n}")
    return _result(violations)


def interference_margin(d: GearboxDesign) -> float:
    """Clearance (mm) between planet and carrier extrusion, minus the required gap."""
    if d.np1 < 1:
        return -math.inf
    rs = d.m1 * d.Ns1 / 2
    rp = d.m1 * d.Np1 / 2
    # WPG: the extrusion runs beside the smaller stage-2 planets; checking the
    # stage-1 planet would reject the reference 21.4:1 design
    clear = d.m2 * d.Np2 / 2 if d.type is GearboxType.WPG else rp
    return (2 * (rs + rp) * math.sin(math.pi / (2 * d.np1)) - clear
            - CARRIER_EXTRUSION_RADIUS - CARRIER_CLEARANCE)


def check_interference(d: GearboxDesign) -> CheckResult:
    if d.Np1 == 0 or (d.type is GearboxType.WPG and d.Np2 == 0):
        return _result(["no planet gear"])
    margin = interference_margin(d)
    # 1e-9 absorbs rounding in the sine term at exact-boundary designs
    if margin < -1e-9:
        return _result([f"planet/carrier-extrusion clearance short by {-margin:.3f} mm"])
    return _result([])


def check_bounds(d: GearboxDesign, motor: MotorSpec) -> CheckResult:
    """Module, teeth, planet-count, and housing-diameter limits.

    The housing limit is the motor's stator diameter.  Besides the ring pitch
    diameters it also applies to the stage-1 planet envelope ``m1 (Ns1 + 2 Np1)``,
    which only binds for CPG (the other types have a ring there).
    """
    d_max = motor.stator_outer_diameter
    violations = []
    modules = [("m1", d.m1)] + ([("m2", d.m2)] if d.type is not GearboxType.SSPG else [])
    for name, m in modules:
        if not MODULE_MIN <= m <= MODULE_MAX:
            violations.append(f"{name} = {m} outside [{MODULE_MIN}, {MODULE_MAX}] mm")
    small_gears = [("Ns1", d.Ns1), ("Np1", d.Np1)]
    if d.type is not GearboxType.SSPG:
        small_gears.append(("Np2", d.Np2))
    for name, n in small_gears:
        if n < TEETH_MIN:
            violations.append(f"{name} = {n} < {TEETH_MIN}")
    if not PLANETS_MIN <= d.np1 <= PLANETS_MAX:
        violations.append(f"np1 = {d.np1} outside [{PLANETS_MIN}, {PLANETS_MAX}]")
    rings = []
    if d.type is not GearboxType.CPG:
        rings.append(("m1 Nr1", _exact(d.m1) * d.Nr1))
    if d.type is not GearboxType.SSPG:
        rings.append(("m2 Nr2", _exact(d.m2) * d.Nr2))
    rings.append(("m1 (Ns1 + 2 Np1)", _exact(d.m1) * (d.Ns1 + 2 * d.Np1)))
    for name, dia in rings:
        if dia > _exact(d_max):
            violations.append(f"{name} = {float(dia)} mm exceeds housing {d_max} mm")
    return _result(violations)


def check_all(d: GearboxDesign, motor: MotorSpec) -> CheckResult:
    violations = []
    for res in (check_geometric(d), check_meshing(d), check_interference(d), check_bounds(d, motor)):
        violations.extend(res.violations)
    if gear_ratio(d) is None or gear_ratio(d) <= 0:
        violations.append("gear ratio undefined or non-positive")
    return _result(violations)


# ---------------------------------------------------------------- mass / efficiency


@dataclass(frozen=True)
class MassModel:
    """Gears as solid steel discs of pitch diameter, plus carrier/housing overhead."""

    density: float = 7850.0  # kg/m^3
    face_width_per_module: float = 10.0  # face width = 10 m
    carrier_fraction: float = 0.25
    fixed_hardware: float = 0.05  # kg


@dataclass(frozen=True)
class MeshLossModel:
    """Tooth-count dependent mesh loss, ``1 - pi f (1/z1 +- 1/z2)`` per mesh.

    ``friction`` is an effective coefficient that also lumps bearing and
    churning losses; 0.23 puts the reference designs near their tabulated
    efficiencies.  ``friction = 0`` gives a lossless gearbox.
    """

    friction: float = 0.23


DEFAULT_MASS_MODEL = MassModel()
DEFAULT_MESH_MODEL = MeshLossModel()


def gears_of(d: GearboxDesign) -> list[tuple[int, float, int]]:
    """(teeth, module, count) for every physical gear in ``d``."""
    gears = [(d.Ns1, d.m1, 1), (d.Np1, d.m1, d.np1)]
    if d.type is not GearboxType.CPG:
        gears.append((d.Nr1, d.m1, 1))
    if d.type is not GearboxType.SSPG:
        gears += [(d.Np2, d.m2, d.np2), (d.Nr2, d.m2, 1)]
    return [g for g in gears if g[0] > 0 and g[2] > 0]


def solid_gear_mass(gears: Iterable[tuple[int, float, int]], model: MassModel = DEFAULT_MASS_MODEL) -> float:
    total = 0.0
    for teeth, module, count in gears:
        radius = module * teeth / 2e3
        width = model.face_width_per_module * module / 1e3
        total += count * math.pi * radius**2 * width * model.density
    return total


def gearbox_mass(d: GearboxDesign, model: MassModel = DEFAULT_MASS_MODEL) -> float:
    gear_mass = solid_gear_mass(gears_of(d), model)
    return (1 + model.carrier_fraction) * gear_mass + model.fixed_hardware


def mesh_efficiency(z1, z2, internal: bool, model: MeshLossModel = DEFAULT_MESH_MODEL):
    """Efficiency of one mesh; for internal meshes ``z2`` is the ring."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    sign = -1.0 if internal else 1.0
    return 1.0 - math.pi * model.friction * (1.0 / z1 + sign / z2)


def _planetary_efficiency(basic_ratio, eta0):
    # fixed ring, sun driving, carrier output; basic_ratio = |ring/sun| through the planets
    return (1.0 + eta0 * basic_ratio) / (1.0 + basic_ratio)


def _efficiency_arrays(gtype: GearboxType, X: np.ndarray, model: MeshLossModel) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Ns1, Np1, Nr1, _, Np2, Nr2 = (X[:, i] for i in range(6))
    if gtype is GearboxType.SSPG:
        eta0 = mesh_efficiency(Ns1, Np1, False, model) * mesh_efficiency(Np1, Nr1, True, model)
        return _planetary_efficiency(Nr1 / Ns1, eta0)
    if gtype is GearboxType.CPG:
        eta0 = mesh_efficiency(Ns1, Np1, False, model) * mesh_efficiency(Np2, Nr2, True, model)
        return _planetary_efficiency(Np1 * Nr2 / (Ns1 * Np2), eta0)
    # Sun -> carrier through stage 1, then carrier -> output ring through the
    # two ring meshes.  In the carrier frame the output ring drives, which
    # gives (1 - u) / (1 - eta_rings u) with u the ring-to-ring basic ratio.
    eta_sun = _planetary_efficiency(
        Nr1 / Ns1, mesh_efficiency(Ns1, Np1, False, model) * mesh_efficiency(Np1, Nr1, True, model))
    u = Nr1 * Np2 / (Np1 * Nr2)
    eta_rings = mesh_efficiency(Np1, Nr1, True, model) * mesh_efficiency(Np2, Nr2, True, model)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta_diff = (1.0 - u) / (1.0 - eta_rings * u)
    return np.where((u > 0) & (u < 1), eta_sun * eta_diff, np.nan)


def gearbox_efficiency(d: GearboxDesign, model: MeshLossModel = DEFAULT_MESH_MODEL) -> float:
    ratio = gear_ratio(d)
    if ratio is None or ratio <= 0:
        raise ValueError(f"efficiency undefined for a design without a positive ratio: {d}")
    return float(_efficiency_arrays(d.type, np.array(d.as_vector()), model)[0])


@dataclass(frozen=True)
class CostWeights:
    mass: float = 0.33
    efficiency: float = 0.67
    ratio: float = 1.0


DEFAULT_COST_WEIGHTS = CostWeights()


def stage1_cost(mass, eff, gr, gr_req, weights: CostWeights = DEFAULT_COST_WEIGHTS):
    return weights.mass * mass - weights.efficiency * eff + weights.ratio * np.abs(gr_req - gr)


# ---------------------------------------------------------------- enumeration


def _feasible_mask(gtype: GearboxType, X: np.ndarray, d_max: float) -> np.ndarray:
    """Vectorised equivalent of :func:`check_all` over rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Ns1, Np1, Nr1, Ns2, Np2, Nr2, m1, m2, np1, np2 = (X[:, i] for i in range(10))
    tol = 1e-9
    ok = np.ones(len(X), dtype=bool)
    # structural zeros
    if gtype is GearboxType.SSPG:
        ok &= (Ns2 == 0) & (Np2 == 0) & (Nr2 == 0) & (m2 == 0) & (np2 == 0)
    else:
        ok &= (Ns2 == 0) & (m1 == m2) & (np1 == np2)
        if gtype is GearboxType.CPG:
            ok &= Nr1 == 0
    # geometric
    if gtype is not GearboxType.CPG:
        ok &= Nr1 == Ns1 + 2 * Np1
    if gtype is not GearboxType.SSPG:
        ok &= np.abs(m2 * Nr2 - (m1 * (Ns1 + Np1) + m2 * Np2)) < tol
    if gtype is GearboxType.WPG:
        ok &= m2 * Nr2 < m1 * Nr1 - tol
    # meshing
    n = np.where(np1 > 0, np1, 1)
    ok &= np1 > 0
    if gtype is GearboxType.SSPG:
        ok &= np.mod(Ns1 + Nr1, n) == 0
    else:
        if gtype is GearboxType.WPG:
            ok &= np.mod(Ns1 + Nr1, n) == 0
        ok &= (np.mod(Ns1, n) == 0) & (np.mod(Nr2, n) == 0)
    # interference
    rs, rp = m1 * Ns1 / 2, m1 * Np1 / 2
    clear = m2 * Np2 / 2 if gtype is GearboxType.WPG else rp
    margin = (2 * (rs + rp) * np.sin(np.pi / (2 * n)) - clear
              - CARRIER_EXTRUSION_RADIUS - CARRIER_CLEARANCE)
    ok &= (Np1 > 0) & (margin >= -1e-9)
    # bounds
    ok &= (m1 >= MODULE_MIN) & (m1 <= MODULE_MAX) & (Ns1 >= TEETH_MIN) & (Np1 >= TEETH_MIN)
    ok &= (np1 >= PLANETS_MIN) & (np1 <= PLANETS_MAX)
    ok &= m1 * (Ns1 + 2 * Np1) <= d_max + tol
    if gtype is not GearboxType.CPG:
        ok &= m1 * Nr1 <= d_max + tol
    if gtype is not GearboxType.SSPG:
        ok &= (m2 >= MODULE_MIN) & (m2 <= MODULE_MAX) & (Np2 >= TEETH_MIN)
        ok &= m2 * Nr2 <= d_max + tol
    # positive, defined ratio
    ratio = _ratio_arrays(gtype, X)
    ok &= np.isfinite(ratio) & (ratio > 0)
    return ok


def _ratio_arrays(gtype: GearboxType, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Ns1, Np1, Nr1, _, Np2, Nr2 = (X[:, i] for i in range(6))
    with np.errstate(divide="ignore", invalid="ignore"):
        if gtype is GearboxType.SSPG:
            return 1 + Nr1 / Ns1
        if gtype is GearboxType.CPG:
            return 1 + Nr2 * Np1 / (Ns1 * Np2)
        denom = Np1 * Nr2 - Nr1 * Np2
        out = (1 + Nr1 / Ns1) * (Np1 * Nr2) / denom
    return np.where(denom != 0, out, np.nan)


def _candidate_vectors(gtype: GearboxType, d_max: float) -> np.ndarray:
    """All teeth/module/planet combinations satisfying the geometric equalities.

    Unknowns fixed by an equality (ring teeth) are derived instead of swept; the
    remaining constraints are applied by :func:`_feasible_mask`.
    """
    rows = []
    for m in MODULES:
        n_max = min(TEETH_MAX, int(math.floor(d_max / m + 1e-9)))
        if n_max < 3 * TEETH_MIN:
            continue
        t = np.arange(TEETH_MIN, n_max + 1)
        if gtype is GearboxType.SSPG:
            Ns, Np = np.meshgrid(t, t, indexing="ij")
            Ns, Np = Ns.ravel(), Np.ravel()
            Nr = Ns + 2 * Np
            keep = Nr <= n_max
            Ns, Np, Nr = Ns[keep], Np[keep], Nr[keep]
            zeros = np.zeros_like(Ns)
            base = np.column_stack([Ns, Np, Nr, zeros, zeros, zeros])
            mods = (m, 0.0)
        else:
            Ns, Np1, Np2 = np.meshgrid(t, t, t, indexing="ij")
            Ns, Np1, Np2 = Ns.ravel(), Np1.ravel(), Np2.ravel()
            Nr2 = Ns + Np1 + Np2
            keep = (Nr2 <= n_max) & (Ns + 2 * Np1 <= n_max)
            if gtype is GearboxType.WPG:
                keep &= Np2 < Np1
            Ns, Np1, Np2, Nr2 = Ns[keep], Np1[keep], Np2[keep], Nr2[keep]
            zeros = np.zeros_like(Ns)
            Nr1 = Ns + 2 * Np1 if gtype is GearboxType.WPG else zeros
            base = np.column_stack([Ns, Np1, Nr1, zeros, Np2, Nr2])
            mods = (m, m)
        for n in range(PLANETS_MIN, PLANETS_MAX + 1):
            block = np.empty((len(base), 10))
            block[:, :6] = base
            block[:, 6], block[:, 7] = mods
            block[:, 8] = n
            block[:, 9] = 0 if gtype is GearboxType.SSPG else n
            rows.append(block)
    if not rows:
        return np.empty((0, 10))
    return np.concatenate(rows)


@dataclass(frozen=True)
class CandidateSet:
    """Feasible designs of one type for one motor, sorted by gear ratio."""

    gtype: GearboxType
    X: np.ndarray
    ratio: np.ndarray
    efficiency: np.ndarray
    gearbox_mass: np.ndarray

    def __len__(self):
        return len(self.ratio)


def _gear_mass_arrays(gtype: GearboxType, X: np.ndarray, model: MassModel) -> np.ndarray:
    Ns1, Np1, Nr1, _, Np2, Nr2, m1, m2, np1, np2 = (X[:, i] for i in range(10))

    def disc(teeth, m, count):
        radius = m * teeth / 2e3
        return count * np.pi * radius**2 * (model.face_width_per_module * m / 1e3) * model.density

    total = disc(Ns1, m1, 1) + disc(Np1, m1, np1)
    if gtype is not GearboxType.CPG:
        total = total + disc(Nr1, m1, 1)
    if gtype is not GearboxType.SSPG:
        total = total + disc(Np2, m2, np2) + disc(Nr2, m2, 1)
    return (1 + model.carrier_fraction) * total + model.fixed_hardware


@lru_cache(maxsize=64)
def enumerate_feasible(motor: MotorSpec, gtype: GearboxType,
                       mass_model: MassModel = DEFAULT_MASS_MODEL,
                       mesh_model: MeshLossModel = DEFAULT_MESH_MODEL) -> CandidateSet:
    gtype = GearboxType(gtype)
    X = _candidate_vectors(gtype, motor.stator_outer_diameter)
    X = X[_feasible_mask(gtype, X, motor.stator_outer_diameter)]
    ratio = _ratio_arrays(gtype, X)
    order = np.argsort(ratio, kind="stable")
    X, ratio = X[order], ratio[order]
    eff = _efficiency_arrays(gtype, X, mesh_model) if len(X) else np.empty(0)
    mass = _gear_mass_arrays(gtype, X, mass_model) if len(X) else np.empty(0)
    for arr in (X, ratio, eff, mass):
        arr.setflags(write=False)
    return CandidateSet(gtype, X, ratio, eff, mass)


@dataclass(frozen=True)
class GearboxEval:
    design: GearboxDesign
    gear_ratio: float
    efficiency: float
    mass: float  # actuator mass: motor + gearbox, kg
    gearbox_mass: float
    cost: float
    requested_ratio: float

    @property
    def type(self) -> GearboxType:
        return self.design.type


def _select(cands: CandidateSet, motor: MotorSpec, gr_req: float, tolerance: float,
            weights: CostWeights) -> GearboxEval | None:
    lo = np.searchsorted(cands.ratio, gr_req - tolerance - 1e-9, side="left")
    hi = np.searchsorted(cands.ratio, gr_req + tolerance + 1e-9, side="right")
    if hi <= lo:
        return None
    X = cands.X[lo:hi]
    ratio = cands.ratio[lo:hi]
    mass = cands.gearbox_mass[lo:hi] + motor.mass
    eff = cands.efficiency[lo:hi]
    cost = stage1_cost(mass, eff, ratio, gr_req, weights)
    teeth_sum = X[:, [0, 1, 2, 3, 4, 5]].sum(axis=1)
    # np.lexsort: last key is primary
    keys = [X[:, i] for i in reversed(range(10))] + [teeth_sum, mass, cost]
    best = int(np.lexsort(keys)[0])
    design = GearboxDesign.from_vector(cands.gtype, X[best])
    return GearboxEval(
        design=design,
        gear_ratio=float(ratio[best]),
        efficiency=float(eff[best]),
        mass=float(mass[best]),
        gearbox_mass=float(cands.gearbox_mass[lo + best]),
        cost=float(cost[best]),
        requested_ratio=float(gr_req),
    )


def brute_force_search(motor: MotorSpec, gr_req: float, gtype: GearboxType | str,
                       tolerance: float = RATIO_TOLERANCE,
                       weights: CostWeights = DEFAULT_COST_WEIGHTS,
                       mass_model: MassModel = DEFAULT_MASS_MODEL,
                       mesh_model: MeshLossModel = DEFAULT_MESH_MODEL) -> GearboxEval | None:
    """Cheapest feasible design of one type whose ratio is within ``tolerance`` of ``gr_req``.

    Returns ``None`` when no design of that type qualifies.  Ties on cost are
    broken by lower actuator mass, then fewer teeth, then the design vector.
    """
    if not RATIO_GRID_MIN - 1e-9 <= gr_req <= RATIO_GRID_MAX + 1e-9:
        raise ValueError(f"requested ratio {gr_req} outside [{RATIO_GRID_MIN}, {RATIO_GRID_MAX}]")
    cands = enumerate_feasible(motor, GearboxType(gtype), mass_model, mesh_model)
    return _select(cands, motor, gr_req, tolerance, weights)


def ratio_grid() -> list[float]:
    n = int(round((RATIO_GRID_MAX - RATIO_GRID_MIN) / RATIO_GRID_STEP))
    return [round(RATIO_GRID_MIN + k * RATIO_GRID_STEP, 1) for k in range(n + 1)]


@dataclass(frozen=True)
class ActuatorMapEntry:
    requested_ratio: float
    best: GearboxEval
    motor_id: int

    @property
    def type(self) -> GearboxType:
        return self.best.type

    def peak_output_torque(self, motor: MotorSpec) -> float:
        return motor.peak_torque * self.best.gear_ratio * self.best.efficiency


def build_actuator_map(motor: MotorSpec, types: Sequence[GearboxType | str] = TYPE_ORDER,
                       tolerance: float = RATIO_TOLERANCE,
                       weights: CostWeights = DEFAULT_COST_WEIGHTS,
                       mass_model: MassModel = DEFAULT_MASS_MODEL,
                       mesh_model: MeshLossModel = DEFAULT_MESH_MODEL) -> list[ActuatorMapEntry]:
    """Best gearbox per grid ratio, choosing among ``types`` by lowest cost.

    Grid points with no feasible design of any type are left out.
    """
    order = [t for t in TYPE_ORDER if t in {GearboxType(x) for x in types}]
    entries = []
    for gr_req in ratio_grid():
        best = None
        for gtype in order:
            ev = brute_force_search(motor, gr_req, gtype, tolerance, weights, mass_model, mesh_model)
            if ev is not None and (best is None or ev.cost < best.cost):
                best = ev
        if best is not None:
            entries.append(ActuatorMapEntry(gr_req, best, motor.id))
    return entries


# ---------------------------------------------------------------- map files

MAP_COLUMNS = ("requested_ratio", "type", "X", "gear_ratio", "efficiency", "mass_kg",
               "peak_output_torque_nm", "cost")


def map_records(entries: Sequence[ActuatorMapEntry], motor: MotorSpec) -> list[dict]:
    return [
        {
            "requested_ratio": e.requested_ratio,
            "type": e.type.value,
            "X": e.best.design.as_vector(),
            "gear_ratio": e.best.gear_ratio,
            "efficiency": e.best.efficiency,
            "mass_kg": e.best.mass,
            "peak_output_torque_nm": e.peak_output_torque(motor),
            "cost": e.best.cost,
            "gearbox_mass_kg": e.best.gearbox_mass,
        }
        for e in entries
    ]


def write_map_json(path: str | Path, entries: Sequence[ActuatorMapEntry], motor: MotorSpec) -> None:
    Path(path).write_text(json.dumps(map_records(entries, motor), indent=1) + "\n")


def write_map_csv(path: str | Path, entries: Sequence[ActuatorMapEntry], motor: MotorSpec) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MAP_COLUMNS)
        for rec in map_records(entries, motor):
            row = [rec[c] for c in MAP_COLUMNS]
            row[2] = " ".join(f"{v:g}" for v in rec["X"])
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_map_json(path: str | Path, motor: MotorSpec) -> list[ActuatorMapEntry]:
    entries = []
    for rec in json.loads(Path(path).read_text()):
        design = GearboxDesign.from_vector(rec["type"], rec["X"])
        ev = GearboxEval(
            design=design,
            gear_ratio=float(rec["gear_ratio"]),
            efficiency=float(rec["efficiency"]),
            mass=float(rec["mass_kg"]),
            gearbox_mass=float(rec.get("gearbox_mass_kg", float(rec["mass_kg"]) - motor.mass)),
            cost=float(rec["cost"]),
            requested_ratio=float(rec["requested_ratio"]),
        )
        entries.append(ActuatorMapEntry(float(rec["requested_ratio"]), ev, motor.id))
    return entries
