"""Brushless motor catalog and motor + gearbox actuator composition."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .gearbox import GearboxDesign


class CatalogError(ValueError):
    """Raised for a missing or malformed motor catalog."""


class InfeasibleActuatorError(ValueError):
    """Raised when a gearbox cannot be paired with a motor."""


@dataclass(frozen=True)
class MotorSpec:
    id: int
    name: str
    mass: float  # kg
    peak_torque: float  # N m at the motor shaft
    stator_outer_diameter: float  # mm
    max_speed: float  # rad/s, carried but not enforced in rollouts

    def __post_init__(self):
        if not 1 <= self.id <= 6:
            raise CatalogError(f"motor id {self.id} outside 1..6")
        for field in ("mass", "peak_torque", "stator_outer_diameter", "max_speed"):
            value = getattr(self, field)
            if not value > 0:
                raise CatalogError(f"motor {self.id}: {field} must be positive, got {value}")


_CATALOG_KEYS = ("id", "name", "mass_kg", "peak_torque_nm", "stator_diameter_mm", "max_speed_rad_s")


def default_catalog_path() -> Path:
    return Path(str(resources.files("monoped_codesign") / "data" / "motors.json"))


def load_catalog(path: str | Path | None = None) -> list[MotorSpec]:
    """Load motors from a JSON array and return them sorted by id.

    Each record needs the keys ``id, name, mass_kg, peak_torque_nm,
    stator_diameter_mm, max_speed_rad_s``; extra keys (notes) are ignored.
    """
    path = Path(path) if path is not None else default_catalog_path()
    if not path.is_file():
        raise CatalogError(f"motor catalog not found: {path}")
    try:
        records = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(records, list):
        raise CatalogError(f"{path}: expected a JSON array of motors")

    motors: dict[int, MotorSpec] = {}
    for i, rec in enumerate(records):
        if not isinstance(rec, dict) or any(k not in rec for k in _CATALOG_KEYS):
            raise CatalogError(f"{path}: record {i} must have keys {', '.join(_CATALOG_KEYS)}")
        try:
            motor = MotorSpec(
                id=int(rec["id"]),
                name=str(rec["name"]),
                mass=float(rec["mass_kg"]),
                peak_torque=float(rec["peak_torque_nm"]),
                stator_outer_diameter=float(rec["stator_diameter_mm"]),
                max_speed=float(rec["max_speed_rad_s"]),
            )
        except (TypeError, ValueError) as exc:
            raise CatalogError(f"{path}: record {i}: {exc}") from exc
        if motor.id in motors:
            raise CatalogError(f"{path}: duplicate motor id {motor.id}")
        motors[motor.id] = motor
    return [motors[k] for k in sorted(motors)]


@dataclass(frozen=True)
class ActuatorSpec:
    motor: MotorSpec
    gearbox: GearboxDesign
    gear_ratio: float
    efficiency: float
    gearbox_mass: float

    def __post_init__(self):
        if not 0.0 < self.efficiency <= 1.0:
            raise InfeasibleActuatorError(f"efficiency must be in (0, 1], got {self.efficiency}")
        if not self.gear_ratio > 0:
            raise InfeasibleActuatorError(f"gear ratio must be positive, got {self.gear_ratio}")
        if self.gearbox_mass < 0:
            raise InfeasibleActuatorError("gearbox mass cannot be negative")

    @property
    def total_mass(self) -> float:
        return self.motor.mass + self.gearbox_mass

    @property
    def peak_output_torque(self) -> float:
        return self.motor.peak_torque * self.gear_ratio * self.efficiency


def make_actuator(motor: MotorSpec, gearbox: GearboxDesign, eff: float) -> ActuatorSpec:
    """Pair a motor with a gearbox design, rejecting pairings that violate any gearbox check."""
    from . import gearbox as gb

    report = gb.check_all(gearbox, motor)
    if not report.ok:
        raise InfeasibleActuatorError(f"gearbox infeasible for {motor.name}: {report}")
    return ActuatorSpec(
        motor=motor,
        gearbox=gearbox,
        gear_ratio=float(gb.gear_ratio(gearbox)),
        efficiency=eff,
        gearbox_mass=gb.gearbox_mass(gearbox),
    )
