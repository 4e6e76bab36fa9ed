"""Hit dispersion and the probability of a ring touching a head."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .empirical import DISTANCES, GridKey, StudyGrids
from .errors import InvalidParameterError, MissingDataError, OutOfRangeError, UndetectableError

DEFAULT_RING_RADIUS = 50.0

# Mean head breadth, head thickness and menton-to-top length (mm).
HEAD_BREADTH = 145.0
HEAD_THICKNESS = 194.0
HEAD_MENTON_TOP = 241.0


@dataclass(frozen=True)
class HitModel:
    """Isotropic Gaussian impact scatter around ``mean_offset`` in the target plane."""

    mean_offset: tuple  # (horizontal, vertical) mm
    std: float
    ring_radius: float = DEFAULT_RING_RADIUS

    def __post_init__(self):
        object.__setattr__(self, "mean_offset", tuple(float(v) for v in self.mean_offset))
        if len(self.mean_offset) != 2:
            raise InvalidParameterError("mean_offset must be a 2-vector")
        if not self.std >= 0:
            raise InvalidParameterError("std must be >= 0")
        if not self.ring_radius > 0:
            raise InvalidParameterError("ring_radius must be positive")


@dataclass(frozen=True)
class HeadTarget:
    semi_axis_horizontal: float
    semi_axis_vertical: float

    def __post_init__(self):
        if not (self.semi_axis_horizontal > 0 and self.semi_axis_vertical > 0):
            raise InvalidParameterError("head semi-axes must be positive")


def head_from_anthropometry(orientation: str = "frontal") -> HeadTarget:
    """Head outline seen from the ring's direction of travel."""
    if orientation == "frontal":
        return HeadTarget(HEAD_BREADTH / 2, HEAD_MENTON_TOP / 2)
    if orientation == "lateral":
        return HeadTarget(HEAD_THICKNESS / 2, HEAD_MENTON_TOP / 2)
    if orientation == "top":
        return HeadTarget(HEAD_BREADTH / 2, HEAD_THICKNESS / 2)
    raise InvalidParameterError(f"orientation must be frontal, lateral or top, got {orientation!r}")


def _unit(direction) -> np.ndarray:
    u = np.asarray(direction, dtype=float)
    n = np.linalg.norm(u)
    if u.shape != (2,) or n == 0:
        raise InvalidParameterError("offset direction must be a non-zero 2-vector")
    return u / n


def hit_model_from_grid(grids: StudyGrids, key: GridKey, ring_radius: float = DEFAULT_RING_RADIUS,
                        direction=(1.0, 0.0), std: float | None = None) -> HitModel:
    """Build a hit model from one accuracy cell.

    ``std`` overrides the stored spread and is required when the cell
    carries a mean gap but no standard deviation.
    """
    cell = grids.accuracy.get((key.distance, key.b))
    if cell is None or cell.detected is None:
        raise MissingDataError(f"no accuracy cell for distance {key.distance} mm, b={key.b}")
    if not cell.detected:
        raise UndetectableError(f"fur motion undetectable at distance {key.distance} mm, b={key.b}")
    if cell.mean_gap_mm is None:
        raise MissingDataError(f"accuracy cell ({key.distance}, {key.b}) has no mean gap")
    spread = std if std is not None else cell.std_gap_mm
    if spread is None:
        raise MissingDataError(f"accuracy cell ({key.distance}, {key.b}) has no standard deviation; pass std")
    u = _unit(direction)
    return HitModel(tuple(cell.mean_gap_mm * u), spread, ring_radius)


def hit_model_at(grids: StudyGrids, distance: float, b: float, ring_radius: float = DEFAULT_RING_RADIUS,
                 direction=(1.0, 0.0), std: float | None = None) -> HitModel:
    """Like :func:`hit_model_from_grid` but piecewise-linear between measured distances."""
    lo, hi = DISTANCES[0], DISTANCES[-1]
    if not lo <= distance <= hi:
        raise OutOfRangeError(f"distance {distance} mm outside [{lo}, {hi}]")
    below = max(d for d in DISTANCES if d <= distance)
    above = min(d for d in DISTANCES if d >= distance)
    m0 = hit_model_from_grid(grids, GridKey(below, b), ring_radius, direction, std)
    if above == below:
        return m0
    m1 = hit_model_from_grid(grids, GridKey(above, b), ring_radius, direction, std)
    t = (distance - below) / (above - below)
    offset = tuple((1 - t) * a + t * c for a, c in zip(m0.mean_offset, m1.mean_offset))
    return HitModel(offset, (1 - t) * m0.std + t * m1.std, ring_radius)


def inside_dilated_ellipse(x, y, head: HeadTarget, ring_radius: float):
    """Whether a ring centred at (x, y) overlaps the head.

    The head ellipse is grown by the ring radius along both semi-axes; this
    is exact for a circular head and a close approximation otherwise.
    """
    a = head.semi_axis_horizontal + ring_radius
    b = head.semi_axis_vertical + ring_radius
    return (np.asarray(x) / a) ** 2 + (np.asarray(y) / b) ** 2 <= 1.0


def sample_impacts(model: HitModel, n_samples: int, seed=None, rng=None) -> np.ndarray:
    gen = rng if rng is not None else np.random.default_rng(seed)
    z = gen.standard_normal((n_samples, 2))
    return np.asarray(model.mean_offset) + model.std * z


def hit_probability(model: HitModel, head: HeadTarget, n_samples: int = 100_000, seed=0) -> float:
    """Monte Carlo fraction of sampled rings that touch the head."""
    if n_samples < 1:
        raise InvalidParameterError("n_samples must be >= 1")
    pts = sample_impacts(model, n_samples, seed)
    hits = inside_dilated_ellipse(pts[:, 0], pts[:, 1], head, model.ring_radius)
    return float(np.count_nonzero(hits)) / n_samples


def head_overlap_distance(x, y, head: HeadTarget) -> float:
    """Euclidean distance from (x, y) to the head ellipse, 0 inside.

    Used to cross-check the dilated-ellipse test; solved by bisection on
    the closest-point Lagrange multiplier.
    """
    a, b = head.semi_axis_horizontal, head.semi_axis_vertical
    px, py = abs(float(x)), abs(float(y))
    if (px / a) ** 2 + (py / b) ** 2 <= 1.0:
        return 0.0

    def g(t):
        return (a * px / (t + a * a)) ** 2 + (b * py / (t + b * b)) ** 2 - 1.0

    lo, hi = 0.0, max(a, b) * math.hypot(px, py) + 1.0
    while g(hi) > 0:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    cx, cy = a * a * px / (t + a * a), b * b * py / (t + b * b)
    return math.hypot(px - cx, py - cy)
