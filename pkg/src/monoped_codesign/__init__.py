"""Actuator and control co-design for a planar five-bar jumping monoped."""

__version__ = "0.1.0"
