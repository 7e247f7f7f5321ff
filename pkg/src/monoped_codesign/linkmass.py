"""Sandwich-structure link mass: a plastic core between two aluminium plates."""

from __future__ import annotations

from dataclasses import dataclass, fields


@dataclass(frozen=True)
class LinkMassModel:
    plate_thickness: float = 0.002  # m, each of the two plates
    plate_width: float = 0.030  # m
    core_thickness: float = 0.008  # m
    density_aluminum: float = 2700.0  # kg/m^3
    density_plastic: float = 1250.0  # kg/m^3
    fixed_overhead: float = 0.02  # kg, fasteners and bearings

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "fixed_overhead":
                if value < 0:
                    raise ValueError("fixed_overhead cannot be negative")
            elif not value > 0:
                raise ValueError(f"{f.name} must be positive, got {value}")

    @classmethod
    def from_dict(cls, data: dict) -> LinkMassModel:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown link_mass keys: {', '.join(sorted(unknown))}")
        return cls(**{k: float(v) for k, v in data.items()})

    @property
    def mass_per_length(self) -> float:
        plates = 2 * self.plate_width * self.plate_thickness * self.density_aluminum
        core = self.plate_width * self.core_thickness * self.density_plastic
        return plates + core


def link_mass(model: LinkMassModel, length: float) -> float:
    """Mass (kg) of a link of the given length (m); affine in length."""
    if not length > 0:
        raise ValueError(f"link length must be positive, got {length}")
    return model.mass_per_length * length + model.fixed_overhead
