"""Roundness selection for a target distance.

The plan picks the coefficient that best serves an objective (comfort by
default) among those meeting a notification-rate floor and an optional
notice-time ceiling.  This formalization of "optimum strength per
distance" is our own.

Outcomes between measured distances are interpolated linearly in distance,
never in ``b``.  A cell with a missing rate (or a missing time when a
ceiling is set) is never feasible.  A feasible cell whose objective value
is missing is ranked at the middle of that value's scale: 4 on the 7-point
scales, 2.5 s in the 5 s notice window.  That neutral rank is only used for
ordering and is never reported as an outcome.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .empirical import DISTANCES, OUTCOME_FIELDS, ROUNDNESS, Outcome, StudyGrids, _canonical_b
from .errors import InvalidParameterError, MissingDataError, OutOfRangeError

OBJECTIVES = ("comfort", "noticeability", "min_time")
LIKERT_MIDPOINT = 4.0
NOTICE_WINDOW_S = 5.0


@dataclass(frozen=True)
class PlanRequest:
    distance: float
    min_notification_rate: float = 1.0
    max_mean_time: float | None = None
    objective: str = "comfort"

    def __post_init__(self):
        if not 0.0 <= self.min_notification_rate <= 1.0:
            raise InvalidParameterError("min_notification_rate must be in [0, 1]")
        if self.objective not in OBJECTIVES:
            raise InvalidParameterError(f"objective must be one of {OBJECTIVES}")
        if self.max_mean_time is not None and not self.max_mean_time > 0:
            raise InvalidParameterError("max_mean_time must be positive")


@dataclass(frozen=True)
class PlanResult:
    distance: float
    objective: str
    feasible: bool
    chosen_b: float | None
    expected: Outcome | None
    feasible_set: list = field(default_factory=list)
    unrated: list = field(default_factory=list)  # feasible b ranked by the neutral prior
    fallback_b: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["expected"] = None if self.expected is None else asdict(self.expected)
        return d


def _check_distance(distance):
    lo, hi = DISTANCES[0], DISTANCES[-1]
    if not (math.isfinite(distance) and lo <= distance <= hi):
        raise OutOfRangeError(f"distance {distance} mm outside [{lo}, {hi}]")


def expected_outcome(grids: StudyGrids, distance: float, b: float) -> Outcome:
    """Outcome at ``(distance, b)``, interpolating between neighbouring distances.

    A field is ``None`` if either contributing cell lacks it.
    """
    b = _canonical_b(b)
    _check_distance(distance)
    below = max(d for d in DISTANCES if d <= distance)
    above = min(d for d in DISTANCES if d >= distance)
    c0 = grids.outcome.get((below, b), Outcome())
    if above == below:
        return c0
    c1 = grids.outcome.get((above, b), Outcome())
    t = (distance - below) / (above - below)
    values = {}
    for name in OUTCOME_FIELDS:
        v0, v1 = getattr(c0, name), getattr(c1, name)
        values[name] = None if v0 is None or v1 is None else (1 - t) * v0 + t * v1
    return Outcome(**values)


def _rank_key(b, outcome: Outcome, objective):
    if objective == "min_time":
        score = outcome.mean_time_s
        score = NOTICE_WINDOW_S / 2 if score is None else score
    else:
        value = getattr(outcome, objective)
        score = -(LIKERT_MIDPOINT if value is None else value)
    tie_time = math.inf if outcome.mean_time_s is None else outcome.mean_time_s
    return (score, b, tie_time)


def plan(grids: StudyGrids, req: PlanRequest) -> PlanResult:
    _check_distance(req.distance)
    if not grids.outcome:
        raise MissingDataError("study grid has no outcome cells")

    outcomes = {b: expected_outcome(grids, req.distance, b) for b in ROUNDNESS
                if any(k[1] == b for k in grids.outcome)}
    feasible = []
    for b, o in outcomes.items():
        if o.notification_rate is None or o.notification_rate < req.min_notification_rate:
            continue
        if req.max_mean_time is not None and (o.mean_time_s is None or o.mean_time_s > req.max_mean_time):
            continue
        feasible.append(b)

    objective_field = "mean_time_s" if req.objective == "min_time" else req.objective
    unrated = [b for b in feasible if getattr(outcomes[b], objective_field) is None]

    if feasible:
        chosen = min(feasible, key=lambda b: _rank_key(b, outcomes[b], req.objective))
        return PlanResult(req.distance, req.objective, True, chosen, outcomes[chosen],
                          sorted(feasible), sorted(unrated))

    rated = [(o.notification_rate, b) for b, o in outcomes.items() if o.notification_rate is not None]
    fallback = min(rated, key=lambda rb: (-rb[0], rb[1]))[1] if rated else None
    return PlanResult(req.distance, req.objective, False, None,
                      outcomes.get(fallback) if fallback is not None else None,
                      [], [], fallback)
