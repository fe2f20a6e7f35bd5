"""Closed-form design trade-offs for an acoustic-waveguide tire."""
from dataclasses import asdict, dataclass
from typing import Dict

import numpy as np

from tactire.data.cycles import SensorGeometry


class InvalidGeometryError(ValueError):
    pass


class InvalidSpeedError(ValueError):
    pass


class InvalidFrequencyError(ValueError):
    pass


@dataclass(frozen=True)
class DesignReport:
    query_time: float  # ms
    cycles_per_rotation: float
    min_separation: float  # m
    wavelength: float  # m
    pulse_cycles: int

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    def format_table(self) -> str:
        rows = [
            ("query time", f"{self.query_time:.4f}", "ms"),
            ("cycles per rotation", f"{self.cycles_per_rotation:.2f}", ""),
            ("min separation", f"{self.min_separation * 1e3:.4f}", "mm"),
            ("wavelength", f"{self.wavelength * 1e3:.4f}", "mm"),
            ("pulse cycles", f"{self.pulse_cycles}", ""),
        ]
        name_width = max(len(r[0]) for r in rows)
        value_width = max(len(r[1]) for r in rows)
        return "\n".join(
            f"{name:<{name_width}}  {value:>{value_width}} {unit}".rstrip()
            for name, value, unit in rows
        )


def query_time(geom: SensorGeometry) -> float:
    """Minimum round-trip time along the full waveguide, 2L/c, in ms."""
    if geom.total_length <= 0:
        raise InvalidGeometryError(
            f"waveguide length must be positive, got {geom.total_length} m"
        )
    if geom.speed_of_sound <= 0:
        raise InvalidGeometryError(
            f"speed of sound must be positive, got {geom.speed_of_sound} m/s"
        )
    return 2 * geom.total_length / geom.speed_of_sound * 1e3


def cycles_per_rotation(geom: SensorGeometry) -> float:
    """Ranging cycles that fit into one wheel rotation.

    pi*c / (omega*(2*pi*r + L_inner))
    """
    if geom.angular_speed <= 0:
        raise InvalidSpeedError(
            f"angular speed must be positive, got {geom.angular_speed} rad/s"
        )
    if geom.speed_of_sound <= 0:
        raise InvalidGeometryError(
            f"speed of sound must be positive, got {geom.speed_of_sound} m/s"
        )
    denom = 2 * np.pi * geom.wheel_radius + geom.inner_length
    if denom <= 0:
        raise InvalidGeometryError(f"waveguide length must be positive, got {denom} m")
    return np.pi * geom.speed_of_sound / (geom.angular_speed * denom)


def min_separation(geom: SensorGeometry) -> float:
    """Smallest resolvable spacing between two indentations, n*lambda/2, in m."""
    if geom.pulse_frequency <= 0:
        raise InvalidFrequencyError(
            f"pulse frequency must be positive, got {geom.pulse_frequency} Hz"
        )
    if geom.pulse_cycles < 1:
        raise InvalidFrequencyError(
            f"pulse must contain at least one cycle, got {geom.pulse_cycles}"
        )
    return geom.pulse_cycles * geom.wavelength / 2


def design_report(geom: SensorGeometry) -> DesignReport:
    return DesignReport(
        query_time=query_time(geom),
        cycles_per_rotation=cycles_per_rotation(geom),
        min_separation=min_separation(geom),
        wavelength=geom.wavelength,
        pulse_cycles=geom.pulse_cycles,
    )
