"""Slug-model design equations for speaker-driven vortex ring generators.

Geometry is given in millimetres and piston velocity in mm/s; everything is
converted to SI before the arithmetic.  Momentum is returned in kg*m/s.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidParameterError, ParseError

FORMATION_RANGE = (3.6, 4.5)
DEFAULT_FORMATION_NUMBER = 4.03
DEFAULT_AIR_DENSITY = 1.204  # kg/m^3 at 20 C
DEFAULT_RING_SPEED = 0.72  # m/s
DEFAULT_RING_RADIUS = 50.0  # mm

MM = 1e-3


def _positive(**values):
    for name, v in values.items():
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise InvalidParameterError(f"{name} must be a positive finite number, got {v!r}")


@dataclass(frozen=True)
class SpeakerSpec:
    n: int
    piston_diameter_mm: float
    max_displacement_mm: float
    peak_velocity_mm_s: float = 0.0

    def __post_init__(self):
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 1:
            raise InvalidParameterError(f"speaker count must be an integer >= 1, got {self.n!r}")
        _positive(piston_diameter_mm=self.piston_diameter_mm,
                  max_displacement_mm=self.max_displacement_mm)
        if not (math.isfinite(self.peak_velocity_mm_s) and self.peak_velocity_mm_s >= 0):
            raise InvalidParameterError("peak velocity must be >= 0")


@dataclass(frozen=True)
class NozzleSpec:
    aperture_mm: float
    formation_number: float
    slug_length_mm: float

    def __post_init__(self):
        _positive(aperture_mm=self.aperture_mm, formation_number=self.formation_number,
                  slug_length_mm=self.slug_length_mm)

    @classmethod
    def from_aperture(cls, aperture_mm: float, formation_number: float) -> "NozzleSpec":
        return cls(aperture_mm, formation_number, formation_number * aperture_mm)

    @property
    def in_recommended_range(self) -> bool:
        lo, hi = FORMATION_RANGE
        return lo <= self.formation_number <= hi


@dataclass(frozen=True)
class AirProperties:
    density_kg_m3: float = DEFAULT_AIR_DENSITY

    def __post_init__(self):
        _positive(density_kg_m3=self.density_kg_m3)


@dataclass(frozen=True)
class RingState:
    momentum: float  # kg*m/s
    exit_velocity: float  # m/s
    ring_radius_mm: float = DEFAULT_RING_RADIUS
    translation_speed: float = DEFAULT_RING_SPEED  # m/s


@dataclass(frozen=True)
class DerivationReport:
    piston_volume_mm3: float
    exit_volume_mm3: float
    piston_flow_mm3_s: float
    exit_flow_mm3_s: float
    length_ratio: float

    @property
    def volume_residual(self) -> float:
        return abs(self.piston_volume_mm3 - self.exit_volume_mm3) / self.piston_volume_mm3

    @property
    def flow_residual(self) -> float:
        if self.piston_flow_mm3_s == 0:
            return abs(self.exit_flow_mm3_s)
        return abs(self.piston_flow_mm3_s - self.exit_flow_mm3_s) / self.piston_flow_mm3_s


def design_aperture(speakers: SpeakerSpec, f: float = DEFAULT_FORMATION_NUMBER) -> NozzleSpec:
    """Aperture diameter for which the ejected slug has L/d equal to ``f``.

    The returned nozzle's ``in_recommended_range`` is False when ``f`` lies
    outside 3.6-4.5; that is a warning, not an error.
    """
    _positive(f=f)
    d = (speakers.n * speakers.max_displacement_mm * speakers.piston_diameter_mm ** 2 / f) ** (1 / 3)
    return NozzleSpec.from_aperture(d, f)


def inverse_displacement(n: int, D: float, d: float, f: float) -> float:
    """Piston displacement (mm) that makes aperture ``d`` satisfy formation number ``f``."""
    if not isinstance(n, int) or n < 1:
        raise InvalidParameterError(f"speaker count must be an integer >= 1, got {n!r}")
    _positive(D=D, d=d, f=f)
    return f * d ** 3 / (n * D ** 2)


def exit_velocity(speakers: SpeakerSpec, nozzle: NozzleSpec) -> float:
    """Flow velocity at the aperture in m/s."""
    ratio = speakers.n * speakers.piston_diameter_mm ** 2 / nozzle.aperture_mm ** 2
    return ratio * speakers.peak_velocity_mm_s * MM


def ring_momentum(speakers: SpeakerSpec, nozzle: NozzleSpec,
                  air: AirProperties | None = None,
                  ring_radius_mm: float = DEFAULT_RING_RADIUS,
                  translation_speed: float = DEFAULT_RING_SPEED) -> RingState:
    air = air or AirProperties()
    _positive(ring_radius_mm=ring_radius_mm, translation_speed=translation_speed)
    d = nozzle.aperture_mm * MM
    D = speakers.piston_diameter_mm * MM
    u_p = speakers.peak_velocity_mm_s * MM
    momentum = 0.25 * math.pi * air.density_kg_m3 * speakers.n * nozzle.formation_number * d * D * D * u_p
    return RingState(momentum, exit_velocity(speakers, nozzle), ring_radius_mm, translation_speed)


def derivation_report(speakers: SpeakerSpec, nozzle: NozzleSpec) -> DerivationReport:
    """Volume and flow balances between the pistons and the aperture."""
    piston_area = speakers.n * math.pi * speakers.piston_diameter_mm ** 2 / 4
    exit_area = math.pi * nozzle.aperture_mm ** 2 / 4
    u_exit_mm_s = exit_velocity(speakers, nozzle) / MM
    return DerivationReport(
        piston_volume_mm3=piston_area * speakers.max_displacement_mm,
        exit_volume_mm3=exit_area * nozzle.slug_length_mm,
        piston_flow_mm3_s=piston_area * speakers.peak_velocity_mm_s,
        exit_flow_mm3_s=exit_area * u_exit_mm_s,
        length_ratio=(speakers.n * speakers.max_displacement_mm * speakers.piston_diameter_mm ** 2
                      / nozzle.aperture_mm ** 3),
    )


@dataclass(frozen=True)
class DeviceSpec:
    """A complete generator: speakers, nozzle and calibration.

    ``velocity_calibration`` maps roundness coefficient to measured peak
    piston velocity in mm/s.
    """

    speakers: SpeakerSpec
    nozzle: NozzleSpec
    air: AirProperties = field(default_factory=AirProperties)
    ring_speed_m_s: float = DEFAULT_RING_SPEED
    ring_radius_mm: float = DEFAULT_RING_RADIUS
    velocity_calibration: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceSpec":
        try:
            n = data["n"]
            D = float(data["speaker_diameter_mm"])
            delta = float(data["max_displacement_mm"])
            f = float(data.get("formation_number", DEFAULT_FORMATION_NUMBER))
        except KeyError as exc:
            raise InvalidParameterError(f"device config missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise InvalidParameterError(f"device config: {exc}") from None
        speakers = SpeakerSpec(n, D, delta)
        if data.get("aperture_mm") is not None:
            nozzle = NozzleSpec.from_aperture(float(data["aperture_mm"]), f)
        else:
            nozzle = design_aperture(speakers, f)
        cal = {float(b): float(v) for b, v in (data.get("velocity_calibration") or {}).items()}
        return cls(
            speakers=speakers,
            nozzle=nozzle,
            air=AirProperties(float(data.get("air_density_kg_m3", DEFAULT_AIR_DENSITY))),
            ring_speed_m_s=float(data.get("ring_speed_m_s", DEFAULT_RING_SPEED)),
            ring_radius_mm=float(data.get("ring_radius_mm", DEFAULT_RING_RADIUS)),
            velocity_calibration=cal,
        )

    def to_dict(self) -> dict:
        return {
            "n": self.speakers.n,
            "speaker_diameter_mm": self.speakers.piston_diameter_mm,
            "max_displacement_mm": self.speakers.max_displacement_mm,
            "formation_number": self.nozzle.formation_number,
            "aperture_mm": self.nozzle.aperture_mm,
            "air_density_kg_m3": self.air.density_kg_m3,
            "ring_speed_m_s": self.ring_speed_m_s,
            "ring_radius_mm": self.ring_radius_mm,
            "velocity_calibration": {repr(b): v for b, v in sorted(self.velocity_calibration.items())},
        }


def load_device(path) -> DeviceSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from None
    return DeviceSpec.from_dict(data)


# n=5 three-inch speakers, 30 mm printed nozzle; calibration from the vibrometer sweep.
REFERENCE_DEVICE = {
    "n": 5,
    "speaker_diameter_mm": 51.5,
    "max_displacement_mm": 8.2,
    "formation_number": 4.03,
    "aperture_mm": 30.0,
    "velocity_calibration": {
        "0.001": 568.83,
        "0.002": 892.97,
        "0.003": 1139.30,
        "0.004": 1321.72,
        "1": 2032.20,
    },
}
