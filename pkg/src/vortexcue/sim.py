"""Deterministic room simulator.

Each ring runs through: trigger -> alignment check -> launch -> impact ->
notice or miss.  Every ring draws from its own generator seeded with
``(seed, trigger_index, repeat_index)``, so adding or reordering triggers
never changes another ring's draws.

The grid's mean notice time already runs from emission to the button
press, so it is used as-is for the notice latency; flight time is logged on
the impact event only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .accuracy import HeadTarget, head_from_anthropometry, hit_model_at, inside_dilated_ellipse
from .empirical import DIRECTIONS, StudyGrids, sample_response
from .errors import (InvalidParameterError, MissingDataError, NoInterceptError, OutOfRangeError,
                     ParseError, UndetectableError)
from .physics import REFERENCE_DEVICE, DeviceSpec
from .planner import expected_outcome
from .targeting import (DEFAULT_TOLERANCE_MM, DirectionSpec, PoseState, aperture_normal,
                        arrival_direction, check_alignment, solve_intercept)
from .waveform import _check_roundness

SCENARIO_VERSION = 1
KIND_RANK = {"trigger": 0, "launch": 1, "misaligned": 2, "impact": 2, "notice": 3, "miss": 3}
TERMINAL = ("notice", "miss", "misaligned")
DIRECTION_SNAP_DEG = 15.0


@dataclass(frozen=True)
class Device:
    id: str
    spec: DeviceSpec
    position: tuple
    euler: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Target:
    id: str
    position: tuple
    velocity: tuple = (0.0, 0.0, 0.0)
    facing_deg: float = 0.0
    head: HeadTarget | None = None  # None: pick the outline from the arrival direction


@dataclass(frozen=True)
class Trigger:
    time: float
    device: str
    target: str
    b: float
    count: int = 1
    interval: float = 1.0

    def __post_init__(self):
        if not self.time >= 0:
            raise InvalidParameterError("trigger time must be >= 0")
        if self.count < 1:
            raise InvalidParameterError("repeat count must be >= 1")
        if self.count > 1 and not self.interval > 0:
            raise InvalidParameterError("interval must be positive when count > 1")
        _check_roundness(self.b)


@dataclass(frozen=True)
class Scenario:
    devices: tuple
    targets: tuple
    triggers: tuple
    seed: int = 0
    tolerance_mm: float = DEFAULT_TOLERANCE_MM
    accuracy_std_mm: float | None = None  # used where the grid has no spread

    def __post_init__(self):
        dev_ids = [d.id for d in self.devices]
        tgt_ids = [t.id for t in self.targets]
        if len(set(dev_ids)) != len(dev_ids) or len(set(tgt_ids)) != len(tgt_ids):
            raise InvalidParameterError("duplicate device or target id")
        for tr in self.triggers:
            if tr.device not in dev_ids:
                raise InvalidParameterError(f"trigger names unknown device {tr.device!r}")
            if tr.target not in tgt_ids:
                raise InvalidParameterError(f"trigger names unknown target {tr.target!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if data.get("version") != SCENARIO_VERSION:
            raise InvalidParameterError(f"unsupported scenario version {data.get('version')!r}")
        try:
            devices = tuple(
                Device(str(d["id"]), DeviceSpec.from_dict(d.get("device", REFERENCE_DEVICE)),
                       tuple(d["pos_mm"]), tuple(d.get("euler_deg", (0, 0, 0))))
                for d in data["devices"])
            targets = tuple(
                Target(str(t["id"]), tuple(t["pos_mm"]), tuple(t.get("vel_mm_s", (0, 0, 0))),
                       float(t.get("facing_deg", 0.0)), _head(t.get("head")))
                for t in data["targets"])
            triggers = tuple(
                Trigger(float(t.get("time_s", 0.0)), str(t["device"]), str(t["target"]), float(t["b"]),
                        int(t.get("count", 1)), float(t.get("interval_s", 1.0)))
                for t in data["triggers"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidParameterError):
                raise
            raise InvalidParameterError(f"bad scenario: {exc!r}") from None
        return cls(devices, targets, triggers, int(data.get("seed", 0)),
                   float(data.get("tolerance_mm", DEFAULT_TOLERANCE_MM)),
                   data.get("accuracy_std_mm"))


def _head(spec):
    if spec is None:
        return None
    if isinstance(spec, str):
        return head_from_anthropometry(spec)
    return HeadTarget(float(spec["semi_axis_horizontal"]), float(spec["semi_axis_vertical"]))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from None
    return Scenario.from_dict(data)


@dataclass(frozen=True)
class SimEvent:
    time: float
    kind: str
    device: str
    target: str
    ring: tuple  # (trigger index, repeat index)
    payload: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"time": self.time, "kind": self.kind, "device": self.device, "target": self.target,
                "ring": list(self.ring), "payload": self.payload}


def event_log_text(events) -> str:
    """One JSON object per line; stable key order and float repr."""
    return "".join(json.dumps(e.to_dict(), sort_keys=True, allow_nan=False) + "\n" for e in events)


def _plane_basis(normal):
    """Horizontal and vertical unit vectors across the boresight."""
    up = np.array([0.0, 0.0, 1.0])
    h = np.cross(up, normal)
    if np.linalg.norm(h) < 1e-12:  # firing straight up or down
        h = np.cross(np.array([0.0, 1.0, 0.0]), normal)
    h /= np.linalg.norm(h)
    v = np.cross(normal, h)
    return h, v


def _head_outline(direction: DirectionSpec) -> HeadTarget:
    if abs(direction.phi) >= 60:
        return head_from_anthropometry("top")
    t = math.radians(direction.theta)
    return head_from_anthropometry("frontal" if abs(math.sin(t)) >= abs(math.cos(t)) else "lateral")


def _snap_direction(direction: DirectionSpec) -> DirectionSpec | None:
    """Nearest tabulated test direction within ``DIRECTION_SNAP_DEG``."""
    def unit(theta, phi):
        t, p = math.radians(theta), math.radians(phi)
        return np.array([math.cos(p) * math.cos(t), math.cos(p) * math.sin(t), math.sin(p)])

    u = unit(direction.theta, direction.phi)
    best, best_angle = None, DIRECTION_SNAP_DEG
    for theta, phi, _ in DIRECTIONS.values():
        angle = math.degrees(math.acos(max(-1.0, min(1.0, float(u @ unit(theta, phi))))))
        if angle <= best_angle:
            best, best_angle = DirectionSpec(theta, phi), angle
    return best


def _ring(scn: Scenario, grids: StudyGrids, i: int, k: int, trig: Trigger, dev: Device, tgt: Target):
    rng = np.random.default_rng([scn.seed, i, k])
    t0 = trig.time + k * trig.interval
    ids = (dev.id, tgt.id, (i, k))
    events = [SimEvent(t0, "trigger", *ids, {"b": trig.b})]

    head_now = np.asarray(tgt.position, dtype=float) + np.asarray(tgt.velocity, dtype=float) * t0
    pose = PoseState(dev.position, dev.euler, head_now, tgt.velocity)
    speed = dev.spec.ring_speed_m_s
    try:
        aim, flight = solve_intercept(pose, speed)
    except NoInterceptError as exc:
        events.append(SimEvent(t0, "miss", *ids, {"reason": "no_intercept", "detail": str(exc)}))
        return events

    at_impact = PoseState(dev.position, dev.euler, aim, tgt.velocity)
    align = check_alignment(at_impact, scn.tolerance_mm)
    if not align.aligned:
        events.append(SimEvent(t0, "misaligned", *ids, {
            "off_axis_mm": align.off_axis_distance, "boresight_deg": align.boresight_angle}))
        return events

    distance = align.range_mm
    try:
        outcome = expected_outcome(grids, distance, trig.b)
        model = hit_model_at(grids, distance, trig.b, dev.spec.ring_radius_mm, std=scn.accuracy_std_mm)
    except OutOfRangeError as exc:
        raise MissingDataError(f"cell (distance {distance:.1f} mm, b={trig.b}) unresolvable: {exc}") from None
    except (MissingDataError, UndetectableError) as exc:
        raise MissingDataError(f"cell (distance {distance:.1f} mm, b={trig.b}) unresolvable: {exc}") from None
    if outcome.notification_rate is None:
        raise MissingDataError(f"cell (distance {distance:.1f} mm, b={trig.b}) has no notification rate")

    events.append(SimEvent(t0, "launch", *ids, {"range_mm": distance, "ring_speed_m_s": speed}))

    normal = aperture_normal(dev.euler)
    h_axis, v_axis = _plane_basis(normal)
    rel = np.asarray(aim) - np.asarray(dev.position)
    off = rel - (rel @ normal) * normal
    head_xy = np.array([off @ h_axis, off @ v_axis])
    impact_xy = np.asarray(model.mean_offset) + model.std * rng.standard_normal(2)
    miss_xy = impact_xy - head_xy

    arrival = arrival_direction(aim, tgt.facing_deg, dev.position)
    head = tgt.head or _head_outline(arrival)
    hit = bool(inside_dilated_ellipse(miss_xy[0], miss_xy[1], head, model.ring_radius))
    t_impact = t0 + flight
    events.append(SimEvent(t_impact, "impact", *ids, {
        "flight_s": flight, "gap_mm": float(np.hypot(*miss_xy)), "hit": hit}))

    noticed = bool(rng.random() < outcome.notification_rate)
    if not hit:
        events.append(SimEvent(t_impact, "miss", *ids, {"reason": "off_target"}))
        return events
    if not noticed:
        events.append(SimEvent(t_impact, "miss", *ids, {"reason": "not_noticed"}))
        return events

    snapped = _snap_direction(arrival)
    region = None
    if snapped is not None:
        try:
            region = sample_response(grids, snapped, rng=rng)
        except OutOfRangeError:
            region = None
    latency = outcome.mean_time_s
    t_notice = t_impact if latency is None else max(t0 + latency, t_impact)
    events.append(SimEvent(t_notice, "notice", *ids, {"latency_s": latency, "perceived_region": region}))
    return events


def simulate(scenario: Scenario, grids: StudyGrids) -> list[SimEvent]:
    """Run every trigger and return the time-ordered event log."""
    devices = {d.id: d for d in scenario.devices}
    targets = {t.id: t for t in scenario.targets}
    events = []
    seq = 0
    for i, trig in enumerate(scenario.triggers):
        for k in range(trig.count):
            for ev in _ring(scenario, grids, i, k, trig, devices[trig.device], targets[trig.target]):
                events.append((ev.time, seq, KIND_RANK[ev.kind], ev))
            seq += 1
    events.sort(key=lambda e: e[:3])
    return [e[3] for e in events]
