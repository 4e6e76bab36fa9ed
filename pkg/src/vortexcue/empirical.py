"""Measured study grids: loading, validation, exact lookups, direction tables.

Grids are keyed by ``(distance_mm, b)`` over the measured sets
``DISTANCES`` x ``ROUNDNESS``.  A cell or field that was not measured is
``None``; lookups never substitute a number for it.

CSV files may carry ``#`` comment lines and blank lines.  An empty field
means missing.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import MissingDataError, OutOfRangeError, ParseError, ValidationError
from .targeting import DirectionSpec

DISTANCES = (500, 1000, 1500, 2000, 2500)
ROUNDNESS = (0.001, 0.002, 0.003, 0.004, 1.0)

STUDY1_COLUMNS = ("distance_mm", "b", "notification_rate", "mean_time_s", "noticeability", "comfort")
SOUND_COLUMNS = ("distance_mm", "b", "la_max_db")
ACCURACY_COLUMNS = ("distance_mm", "b", "mean_gap_mm", "std_gap_mm", "detected")
DIRECTION_COLUMNS = ("actual_theta_deg", "actual_phi_deg", "response_region", "percent")

OUTCOME_FIELDS = ("notification_rate", "mean_time_s", "noticeability", "comfort")
ACCURACY_FIELDS = ("mean_gap_mm", "std_gap_mm", "detected")

# The seven test directions around the head: label -> (theta, phi, side).
DIRECTIONS = {
    "A": (60.0, 0.0, "right"),
    "B": (120.0, 0.0, "left"),
    "C": (180.0, 0.0, "left"),
    "D": (240.0, 0.0, "left"),
    "E": (270.0, 30.0, None),
    "F": (300.0, 0.0, "right"),
    "G": (360.0, 0.0, "right"),
}
REGION_SIDE = {label: side for label, (_, _, side) in DIRECTIONS.items()}
REGION_SIDE.update({"other_left": "left", "other_right": "right", "other": None})

PERCENT_SUM_TOL = 0.1


@dataclass(frozen=True)
class Outcome:
    notification_rate: float | None = None
    mean_time_s: float | None = None
    noticeability: float | None = None
    comfort: float | None = None


@dataclass(frozen=True)
class AccuracyCell:
    mean_gap_mm: float | None = None
    std_gap_mm: float | None = None
    detected: bool | None = None


@dataclass(frozen=True)
class GridKey:
    distance: int
    b: float

    def __post_init__(self):
        object.__setattr__(self, "distance", _canonical_distance(self.distance))
        object.__setattr__(self, "b", _canonical_b(self.b))


def _canonical_distance(d) -> int:
    for m in DISTANCES:
        if math.isclose(float(d), m, abs_tol=1e-9):
            return m
    raise OutOfRangeError(f"distance {d} mm is not a measured distance {DISTANCES}")


def _canonical_b(b) -> float:
    for m in ROUNDNESS:
        if math.isclose(float(b), m, rel_tol=1e-9):
            return m
    raise OutOfRangeError(f"roundness {b} is not a measured coefficient {ROUNDNESS}")


@dataclass(frozen=True)
class StudyGrids:
    sound: dict = field(default_factory=dict)  # (d, b) -> LA_max dB
    outcome: dict = field(default_factory=dict)  # (d, b) -> Outcome
    accuracy: dict = field(default_factory=dict)  # (d, b) -> AccuracyCell
    direction: dict = field(default_factory=dict)  # (theta, phi) -> {region: percent}

    def outcome_at(self, distance, b) -> Outcome:
        key = GridKey(distance, b)
        return self.outcome.get((key.distance, key.b), Outcome())

    def accuracy_at(self, distance, b) -> AccuracyCell:
        key = GridKey(distance, b)
        return self.accuracy.get((key.distance, key.b), AccuracyCell())

    def without_roundness(self, b) -> "StudyGrids":
        b = _canonical_b(b)
        keep = lambda table: {k: v for k, v in table.items() if k[1] != b}  # noqa: E731
        return StudyGrids(keep(self.sound), keep(self.outcome), keep(self.accuracy), dict(self.direction))


# -- parsing -----------------------------------------------------------------


def _rows(text: str, path, columns):
    """Yield ``(line_no, {column: raw})`` skipping comments and blank lines."""
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines())
             if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValidationError("file has no header or data rows", path)
    header_no, header_line = lines[0]
    header = tuple(h.strip() for h in next(csv.reader([header_line])))
    if header != columns:
        raise ParseError(f"expected header {','.join(columns)}, got {header_line.strip()}", path, header_no)
    if len(lines) == 1:
        raise ValidationError("file has no data rows", path)
    for line_no, line in lines[1:]:
        fields = [f.strip() for f in next(csv.reader([line]))]
        if len(fields) != len(columns):
            raise ParseError(f"expected {len(columns)} fields, got {len(fields)}", path, line_no)
        yield line_no, dict(zip(columns, fields))


def _num(raw, name, path, line_no, required=False):
    if raw == "":
        if required:
            raise ParseError(f"{name} is required", path, line_no)
        return None
    try:
        v = float(raw)
    except ValueError:
        raise ParseError(f"{name}: not a number: {raw!r}", path, line_no) from None
    if not math.isfinite(v):
        raise ParseError(f"{name}: not finite: {raw!r}", path, line_no)
    return v


def _bool(raw, name, path, line_no):
    low = raw.lower()
    if low == "":
        return None
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ParseError(f"{name}: not a boolean: {raw!r}", path, line_no)


class _Collector:
    """Gathers per-row invariant breaches so a file is rejected as a whole."""

    def __init__(self, path):
        self.path = path
        self.problems: list[tuple[int, str]] = []

    def check(self, ok, line_no, message):
        if not ok:
            self.problems.append((line_no, message))

    def raise_if_any(self):
        if self.problems:
            detail = "; ".join(f"line {n}: {m}" for n, m in self.problems)
            err = ValidationError(f"{len(self.problems)} invalid row(s): {detail}", self.path,
                                  self.problems[0][0])
            err.diagnostics = list(self.problems)
            raise err


def _grid_key(row, path, line_no, bad: _Collector):
    d = _num(row["distance_mm"], "distance_mm", path, line_no, required=True)
    b = _num(row["b"], "b", path, line_no, required=True)
    try:
        return GridKey(d, b)
    except OutOfRangeError as exc:
        bad.check(False, line_no, str(exc))
        return None


def _keyed_table(text, path, columns, make_cell):
    bad = _Collector(path)
    table = {}
    for line_no, row in _rows(text, path, columns):
        key = _grid_key(row, path, line_no, bad)
        cell = make_cell(row, line_no, bad)
        if key is None:
            continue
        k = (key.distance, key.b)
        bad.check(k not in table, line_no, f"duplicate cell {k}")
        table[k] = cell
    bad.raise_if_any()
    return table


def parse_study1(text: str, path="study1.csv") -> dict:
    def make(row, n, bad):
        rate, t, notice, comfort = (_num(row[c], c, path, n) for c in OUTCOME_FIELDS)
        if rate is not None:
            bad.check(0.0 <= rate <= 1.0, n, f"notification_rate {rate} outside [0, 1]")
        for name, v in (("noticeability", notice), ("comfort", comfort)):
            if v is not None:
                bad.check(1.0 <= v <= 7.0, n, f"{name} {v} outside [1, 7]")
        if t is not None:
            bad.check(t >= 0, n, f"mean_time_s {t} is negative")
            bad.check(rate == 1.0, n, "mean_time_s given where notification_rate is not 1.0")
        return Outcome(rate, t, notice, comfort)

    return _keyed_table(text, path, STUDY1_COLUMNS, make)


def parse_sound(text: str, path="sound.csv") -> dict:
    return _keyed_table(text, path, SOUND_COLUMNS,
                        lambda row, n, bad: _num(row["la_max_db"], "la_max_db", path, n))


def parse_accuracy(text: str, path="accuracy.csv") -> dict:
    def make(row, n, bad):
        mean = _num(row["mean_gap_mm"], "mean_gap_mm", path, n)
        std = _num(row["std_gap_mm"], "std_gap_mm", path, n)
        detected = _bool(row["detected"], "detected", path, n)
        for name, v in (("mean_gap_mm", mean), ("std_gap_mm", std)):
            if v is not None:
                bad.check(v >= 0, n, f"{name} {v} is negative")
                bad.check(detected is True, n, f"{name} given for an undetected cell")
        return AccuracyCell(mean, std, detected)

    return _keyed_table(text, path, ACCURACY_COLUMNS, make)


def parse_direction(text: str, path="direction.csv") -> dict:
    bad = _Collector(path)
    table: dict = {}
    first_line = {}
    for n, row in _rows(text, path, DIRECTION_COLUMNS):
        theta = _num(row["actual_theta_deg"], "actual_theta_deg", path, n, required=True)
        phi = _num(row["actual_phi_deg"], "actual_phi_deg", path, n, required=True)
        region = row["response_region"]
        pct = _num(row["percent"], "percent", path, n, required=True)
        bad.check(region != "", n, "empty response_region")
        bad.check(0.0 <= pct <= 100.0, n, f"percent {pct} outside [0, 100]")
        bad.check(-90 <= phi <= 90, n, f"elevation {phi} outside [-90, 90]")
        regions = table.setdefault((theta, phi), {})
        first_line.setdefault((theta, phi), n)
        bad.check(region not in regions, n, f"duplicate region {region!r}")
        regions[region] = pct
    for key, regions in table.items():
        total = sum(regions.values())
        bad.check(abs(total - 100.0) <= PERCENT_SUM_TOL, first_line[key],
                  f"percentages for direction {key} sum to {total:.3f}, not 100")
    bad.check(len({_angle_key(*k) for k in table}) == len(table), 0, "direction listed twice")
    bad.raise_if_any()
    return table


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text: {exc}", path) from None


def _shipped(name: str) -> tuple[str, str]:
    res = resources.files("vortexcue") / "data" / name
    return res.read_text(encoding="utf-8"), f"<shipped>/{name}"


def load_grids(study1=None, sound=None, accuracy=None, direction=None) -> StudyGrids:
    """Load and validate the four grid files; ``None`` selects the shipped file."""
    parts = []
    for path, name, parser in ((study1, "study1.csv", parse_study1),
                               (sound, "sound.csv", parse_sound),
                               (accuracy, "accuracy.csv", parse_accuracy),
                               (direction, "direction.csv", parse_direction)):
        text, label = _shipped(name) if path is None else (_read(path), str(path))
        parts.append(parser(text, label))
    outcome, snd, acc, dirn = parts
    return StudyGrids(sound=snd, outcome=outcome, accuracy=acc, direction=dirn)


def load_grid_dir(directory) -> StudyGrids:
    """Load whichever of the four CSVs exist in ``directory``, shipped data for the rest."""
    directory = Path(directory)
    pick = lambda name: directory / name if (directory / name).exists() else None  # noqa: E731
    return load_grids(pick("study1.csv"), pick("sound.csv"), pick("accuracy.csv"), pick("direction.csv"))


# -- serialization -----------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(float(v))


def _dump(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def dump_grids(grids: StudyGrids) -> dict:
    """Serialize to ``{filename: csv_text}``; parsing the texts gives equal grids."""
    return {
        "study1.csv": _dump(STUDY1_COLUMNS, [
            (d, _fmt(b), *(_fmt(getattr(c, f)) for f in OUTCOME_FIELDS))
            for (d, b), c in sorted(grids.outcome.items())]),
        "sound.csv": _dump(SOUND_COLUMNS, [
            (d, _fmt(b), _fmt(v)) for (d, b), v in sorted(grids.sound.items())]),
        "accuracy.csv": _dump(ACCURACY_COLUMNS, [
            (d, _fmt(b), *(_fmt(getattr(c, f)) for f in ACCURACY_FIELDS))
            for (d, b), c in sorted(grids.accuracy.items())]),
        "direction.csv": _dump(DIRECTION_COLUMNS, [
            (_fmt(t), _fmt(p), region, _fmt(pct))
            for (t, p), regions in sorted(grids.direction.items())
            for region, pct in sorted(regions.items())]),
    }


def save_grids(grids: StudyGrids, directory) -> None:
    """Write each non-empty table; an empty table would not load back."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tables = {"study1.csv": grids.outcome, "sound.csv": grids.sound,
              "accuracy.csv": grids.accuracy, "direction.csv": grids.direction}
    for name, text in dump_grids(grids).items():
        if tables[name]:
            (directory / name).write_text(text, encoding="utf-8")


# -- queries -----------------------------------------------------------------


def lookup(grids: StudyGrids, key: GridKey, field_name: str):
    """Stored value of one field at one cell, or ``None`` if not measured."""
    k = (key.distance, key.b)
    if field_name in OUTCOME_FIELDS:
        cell = grids.outcome.get(k)
    elif field_name in ACCURACY_FIELDS:
        cell = grids.accuracy.get(k)
    elif field_name in ("la_max_db", "sound"):
        return grids.sound.get(k)
    else:
        raise KeyError(f"unknown grid field {field_name!r}")
    return None if cell is None else getattr(cell, field_name)


def sound_delta(grids: StudyGrids, distance, b_hi, b_lo) -> float:
    """LA_max difference (dB) between two coefficients at one distance."""
    hi, lo = GridKey(distance, b_hi), GridKey(distance, b_lo)
    values = []
    for key in (hi, lo):
        v = grids.sound.get((key.distance, key.b))
        if v is None:
            raise MissingDataError(f"no sound level for distance {key.distance} mm, b={key.b}")
        values.append(v)
    return values[0] - values[1]


def _angle_key(theta, phi):
    return (round(float(theta) % 360.0, 9), round(float(phi), 9))


def direction_regions(grids: StudyGrids, actual: DirectionSpec) -> dict:
    want = _angle_key(actual.theta, actual.phi)
    for (theta, phi), regions in grids.direction.items():
        if _angle_key(theta, phi) == want:
            return regions
    raise OutOfRangeError(f"direction theta={actual.theta}, phi={actual.phi} is not in the table")


def region_for(actual: DirectionSpec) -> str | None:
    """Label of the test direction matching ``actual``, if any."""
    want = _angle_key(actual.theta, actual.phi)
    for label, (theta, phi, _) in DIRECTIONS.items():
        if _angle_key(theta, phi) == want:
            return label
    return None


def direction_summary(grids: StudyGrids, actual: DirectionSpec) -> dict:
    """Percent of responses naming the actual region, and naming its side.

    ``same_side`` is ``None`` for a midline direction.
    """
    regions = direction_regions(grids, actual)
    label = region_for(actual)
    exact = regions.get(label, 0.0) if label is not None else None
    side = REGION_SIDE.get(label) if label is not None else None
    same_side = None
    if side is not None:
        same_side = sum(p for r, p in regions.items() if REGION_SIDE.get(r) == side)
    return {"exact_match": exact, "same_side": same_side}


def sample_response(grids: StudyGrids, actual: DirectionSpec, rng_seed=None, size=None, rng=None):
    """Draw perceived regions in proportion to the stored percentages.

    Pass either ``rng_seed`` or a numpy ``Generator``.  With ``size`` an
    array of labels is returned.
    """
    regions = direction_regions(grids, actual)
    labels = sorted(regions)
    p = np.array([regions[r] for r in labels], dtype=float)
    p = p / p.sum()
    gen = rng if rng is not None else np.random.default_rng(rng_seed)
    idx = gen.choice(len(labels), size=size, p=p)
    if size is None:
        return labels[int(idx)]
    return np.asarray(labels, dtype=object)[idx]


def rate_monotonicity_violations(grids: StudyGrids) -> list:
    """Cells where the stored notification rate rises with distance at fixed b."""
    out = []
    for b in ROUNDNESS:
        known = [(d, grids.outcome[(d, b)].notification_rate) for d in DISTANCES
                 if (d, b) in grids.outcome and grids.outcome[(d, b)].notification_rate is not None]
        for (d0, r0), (d1, r1) in zip(known, known[1:]):
            if r1 > r0:
                out.append((b, d0, d1))
    return out
