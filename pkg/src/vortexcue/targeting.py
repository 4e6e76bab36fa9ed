"""Boresight geometry, alignment checks and intercept solving.

Conventions: positions in mm, head velocity in mm/s, ring speed in m/s.
Orientation is yaw-pitch-roll in degrees applied Z-Y-X intrinsic
(``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``); the aperture fires along body +X,
so zero angles aim down world +X.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, InvalidParameterError, NoInterceptError

DEFAULT_TOLERANCE_MM = 50.0
# Absorbs rounding so a head placed exactly on the tolerance circle stays aligned.
_BOUNDARY_SLACK_MM = 1e-9


def _vec3(v, name) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise InvalidParameterError(f"{name} must be a finite 3-vector, got {v!r}")
    return a


@dataclass(frozen=True)
class PoseState:
    avrg_position: tuple
    avrg_euler: tuple  # yaw, pitch, roll in degrees
    head_position: tuple
    head_velocity: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("avrg_position", "avrg_euler", "head_position", "head_velocity"):
            object.__setattr__(self, name, tuple(_vec3(getattr(self, name), name).tolist()))

    @classmethod
    def from_dict(cls, data: dict) -> "PoseState":
        try:
            avrg, head = data["avrg"], data["head"]
            return cls(avrg["pos_mm"], avrg.get("euler_deg", (0, 0, 0)),
                       head["pos_mm"], head.get("vel_mm_s", (0, 0, 0)))
        except (KeyError, TypeError) as exc:
            raise InvalidParameterError(f"bad pose document: {exc}") from None

    def to_dict(self) -> dict:
        return {"avrg": {"pos_mm": list(self.avrg_position), "euler_deg": list(self.avrg_euler)},
                "head": {"pos_mm": list(self.head_position), "vel_mm_s": list(self.head_velocity)}}


@dataclass(frozen=True)
class DirectionSpec:
    """Arrival direction around the head.

    ``theta`` is the horizontal angle measured from the person's right
    (0 deg) through the face (90 deg), left (180 deg) and back (270 deg);
    ``phi`` is elevation.
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % 360.0)
        if not -90 <= self.phi <= 90:
            raise InvalidParameterError(f"elevation must be in [-90, 90], got {self.phi}")


@dataclass(frozen=True)
class AlignmentResult:
    off_axis_distance: float
    boresight_angle: float
    aligned: bool
    range_mm: float


def rotation_matrix(avrg_euler) -> np.ndarray:
    yaw, pitch, roll = np.radians(_vec3(avrg_euler, "avrg_euler"))
    cz, sz = math.cos(yaw), math.sin(yaw)
    cy, sy = math.cos(pitch), math.sin(pitch)
    cx, sx = math.cos(roll), math.sin(roll)
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    return rz @ ry @ rx


def aperture_normal(avrg_euler) -> np.ndarray:
    n = rotation_matrix(avrg_euler)[:, 0]
    return n / np.linalg.norm(n)


def euler_from_normal(normal) -> tuple:
    """Yaw and pitch (roll = 0) that point the aperture along ``normal``."""
    n = _vec3(normal, "normal")
    norm = np.linalg.norm(n)
    if norm == 0:
        raise DegenerateGeometryError("zero direction vector")
    n = n / norm
    yaw = math.degrees(math.atan2(n[1], n[0]))
    pitch = -math.degrees(math.asin(max(-1.0, min(1.0, n[2]))))
    return yaw, pitch, 0.0


def check_alignment(pose: PoseState, tolerance: float = DEFAULT_TOLERANCE_MM) -> AlignmentResult:
    """Perpendicular distance of the head from the boresight ray.

    The head counts as aligned when it lies in front of the aperture and
    within ``tolerance`` mm of the axis (boundary inclusive).
    """
    if tolerance < 0:
        raise InvalidParameterError("tolerance must be >= 0")
    v = np.subtract(pose.head_position, pose.avrg_position)
    rng = float(np.linalg.norm(v))
    if rng == 0:
        raise DegenerateGeometryError("head coincides with the generator position")
    n = aperture_normal(pose.avrg_euler)
    along = float(v @ n)
    off_axis = float(np.linalg.norm(v - along * n))
    angle = math.degrees(math.atan2(off_axis, along))
    aligned = along > 0 and off_axis <= tolerance + _BOUNDARY_SLACK_MM
    return AlignmentResult(off_axis, angle, aligned, rng)


def solve_intercept(pose: PoseState, ring_speed: float) -> tuple[np.ndarray, float]:
    """Aim point (mm) and flight time (s) for a ring meeting a moving head.

    Solves ``|p + v t - a| = s t`` for the smallest positive ``t``, with the
    ring flying straight at constant speed ``s``.
    """
    if not (math.isfinite(ring_speed) and ring_speed > 0):
        raise InvalidParameterError("ring speed must be positive")
    s = ring_speed * 1000.0  # mm/s
    d = np.subtract(pose.head_position, pose.avrg_position)
    v = np.asarray(pose.head_velocity, dtype=float)
    c = float(d @ d)
    if c == 0:
        raise DegenerateGeometryError("head coincides with the generator position")
    vv = float(v @ v)
    if vv == 0:
        t = math.dist(pose.head_position, pose.avrg_position) / s
        return np.asarray(pose.head_position, dtype=float), t
    if vv >= s * s:
        raise NoInterceptError(f"head speed {math.sqrt(vv):.1f} mm/s is not below ring speed {s:.1f} mm/s")

    a = vv - s * s
    b = 2.0 * float(d @ v)
    disc = b * b - 4.0 * a * c  # > 0 because a < 0 < c
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    roots = [r for r in (q / a, c / q) if r > 0]
    if not roots:
        raise NoInterceptError("no positive intercept time")
    t = min(roots)
    aim = np.asarray(pose.head_position, dtype=float) + v * t
    return aim, t


def arrival_direction(head_position, head_facing_deg: float, source_position) -> DirectionSpec:
    """Direction a ring arrives from, in the head's own frame.

    ``head_facing_deg`` is the world yaw of the face (0 = world +X).
    """
    v = _vec3(source_position, "source_position") - _vec3(head_position, "head_position")
    norm = float(np.linalg.norm(v))
    if norm == 0:
        raise DegenerateGeometryError("source coincides with the head")
    face = math.radians(head_facing_deg)
    forward = np.array([math.cos(face), math.sin(face), 0.0])
    right = np.array([math.sin(face), -math.cos(face), 0.0])
    theta = math.degrees(math.atan2(v @ forward, v @ right))
    phi = math.degrees(math.asin(max(-1.0, min(1.0, v[2] / norm))))
    return DirectionSpec(theta, phi)
