"""Fur-frame hit analysis.

Camera frames of the fur target are rectified with a homography to the
generator's point of view; the ring's footprint is found by background
subtraction and compared with the centroid of the whole fur patch.

Image coordinates are ``(x, y)`` = (column, row) with the origin at the
top-left pixel centre.  Frames are greyscale float arrays in [0, 255];
8-bit binary PGM (P5) is the file format.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateGeometryError, InvalidParameterError, ParseError

FUR_EXTENT_MM = 800.0


@dataclass(frozen=True)
class Frame:
    width: int
    height: int
    pixels: np.ndarray  # shape (height, width)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.shape != (self.height, self.width):
            raise InvalidParameterError(f"pixel array {px.shape} does not match {self.width}x{self.height}")
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, arr) -> "Frame":
        arr = np.asarray(arr, dtype=float)
        return cls(arr.shape[1], arr.shape[0], arr)


@dataclass(frozen=True)
class Homography:
    matrix: np.ndarray
    rms: float = 0.0

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float).reshape(3, 3)
        if m[2, 2] != 0:
            m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-12:
            raise DegenerateGeometryError("homography is singular")
        object.__setattr__(self, "matrix", m)

    def apply(self, pts) -> np.ndarray:
        return apply_homography(self.matrix, pts)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))


@dataclass(frozen=True)
class ScaleCalibration:
    mm_per_pixel: float

    def __post_init__(self):
        if not self.mm_per_pixel > 0:
            raise InvalidParameterError("mm_per_pixel must be positive")

    @classmethod
    def from_extent(cls, extent_px: float, extent_mm: float = FUR_EXTENT_MM) -> "ScaleCalibration":
        return cls(extent_mm / extent_px)


def apply_homography(H, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    hom = np.column_stack([pts, np.ones(len(pts))]) @ np.asarray(H, dtype=float).T
    return hom[:, :2] / hom[:, 2:3]


def _normalizer(pts):
    """Similarity moving the centroid to the origin with mean distance sqrt(2)."""
    c = pts.mean(axis=0)
    d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
    if d == 0:
        raise DegenerateGeometryError("all points coincide")
    s = math.sqrt(2) / d
    return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1]])


def _has_collinear_triple(pts, tol=1e-9) -> bool:
    scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1e-300)
    for i, j, k in itertools.combinations(range(len(pts)), 3):
        u, v = pts[j] - pts[i], pts[k] - pts[i]
        if abs(u[0] * v[1] - u[1] * v[0]) <= tol * scale * scale:
            return True
    return False


def estimate_homography(src, dst) -> Homography:
    """Normalized DLT fit of ``dst ~ H @ src`` over >= 4 correspondences."""
    src = np.asarray(src, dtype=float).reshape(-1, 2)
    dst = np.asarray(dst, dtype=float).reshape(-1, 2)
    if len(src) != len(dst):
        raise InvalidParameterError("source and destination point counts differ")
    if len(src) < 4:
        raise DegenerateGeometryError("at least 4 correspondences are required")
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise InvalidParameterError("non-finite correspondence")
    if len(src) == 4 and (_has_collinear_triple(src) or _has_collinear_triple(dst)):
        raise DegenerateGeometryError("three of the four points are collinear")

    Ts, Td = _normalizer(src), _normalizer(dst)
    s = apply_homography(Ts, src)
    d = apply_homography(Td, dst)
    rows = []
    for (x, y), (u, v) in zip(s, d):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    A = np.asarray(rows)
    _, sv, vt = np.linalg.svd(A)
    # A null space of dimension > 1 means the points do not pin down H.
    if len(sv) >= 8 and sv[7] <= 1e-10 * sv[0]:
        raise DegenerateGeometryError("correspondences do not determine a unique homography")
    Hn = vt[-1].reshape(3, 3)
    H = np.linalg.inv(Td) @ Hn @ Ts
    if abs(H[2, 2]) > 1e-15:
        H = H / H[2, 2]
    if abs(np.linalg.det(H / np.abs(H).max())) <= 1e-12:
        raise DegenerateGeometryError("estimated homography is singular")
    resid = apply_homography(H, src) - dst
    rms = float(np.sqrt((resid ** 2).sum(axis=1).mean()))
    return Homography(H, rms)


def warp(frame: Frame, H: Homography, out_size=None) -> Frame:
    """Resample ``frame`` so output pixel ``p`` shows source pixel ``H^-1 p``.

    Bilinear interpolation; output pixels whose preimage falls outside the
    source are 0.
    """
    width, height = out_size if out_size is not None else (frame.width, frame.height)
    try:
        Hinv = np.linalg.inv(H.matrix)
    except np.linalg.LinAlgError:
        raise DegenerateGeometryError("homography is not invertible") from None
    ys, xs = np.mgrid[0:height, 0:width]
    pts = np.column_stack([xs.ravel(), ys.ravel(), np.ones(xs.size)]) @ Hinv.T
    with np.errstate(divide="ignore", invalid="ignore"):
        sx = pts[:, 0] / pts[:, 2]
        sy = pts[:, 1] / pts[:, 2]
    src = frame.pixels
    inside = ((pts[:, 2] != 0) & (sx >= 0) & (sy >= 0)
              & (sx <= frame.width - 1) & (sy <= frame.height - 1))
    out = np.zeros(xs.size)
    sx, sy = sx[inside], sy[inside]
    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    fx, fy = sx - x0, sy - y0
    x1 = np.minimum(x0 + 1, frame.width - 1)
    y1 = np.minimum(y0 + 1, frame.height - 1)
    out[inside] = ((src[y0, x0] * (1 - fx) + src[y0, x1] * fx) * (1 - fy)
                   + (src[y1, x0] * (1 - fx) + src[y1, x1] * fx) * fy)
    return Frame(width, height, out.reshape(height, width))


def background_subtract(frame: Frame, background: Frame, threshold: float) -> np.ndarray:
    if frame.pixels.shape != background.pixels.shape:
        raise InvalidParameterError(
            f"frame {frame.width}x{frame.height} and background "
            f"{background.width}x{background.height} differ in size")
    return np.abs(frame.pixels - background.pixels) > threshold


def intensity_band(frame: Frame, lo: float, hi: float) -> np.ndarray:
    """Pixels whose intensity lies in ``[lo, hi]``; stands in for fur colour."""
    return (frame.pixels >= lo) & (frame.pixels <= hi)


def centroid(mask) -> tuple[float, float] | None:
    """Mean (x, y) of set pixels, ``None`` for an empty mask."""
    ys, xs = np.nonzero(np.asarray(mask, dtype=bool))
    if xs.size == 0:
        return None
    return float(xs.mean()), float(ys.mean())


def measure_gap(hit_centroid, target_centroid, cal: ScaleCalibration) -> float | None:
    if hit_centroid is None or target_centroid is None:
        return None
    return math.dist(hit_centroid, target_centroid) * cal.mm_per_pixel


# -- PGM ---------------------------------------------------------------------

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def read_pgm(path) -> Frame:
    data = Path(path).read_bytes()
    pos = 0
    tokens = []
    for _ in range(4):
        m = _PGM_TOKEN.match(data, pos)
        if not m:
            raise ParseError("truncated PGM header", path)
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise ParseError(f"not a binary PGM (magic {tokens[0]!r})", path)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ParseError("bad PGM header", path) from None
    if maxval != 255:
        raise ParseError(f"only 8-bit PGM is supported (maxval {maxval})", path)
    pos += 1  # single whitespace after maxval
    body = data[pos:pos + width * height]
    if len(body) != width * height:
        raise ParseError("PGM pixel data is truncated", path)
    px = np.frombuffer(body, dtype=np.uint8).reshape(height, width)
    return Frame(width, height, px.astype(float))


def write_pgm(path, frame: Frame) -> None:
    px = np.clip(np.rint(frame.pixels), 0, 255).astype(np.uint8)
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + px.tobytes())


# -- sequence analysis -------------------------------------------------------


@dataclass(frozen=True)
class FrameReport:
    frame: str
    hit: tuple | None
    target: tuple | None
    gap_mm: float | None

    def line(self) -> str:
        if self.hit is None:
            return f"{self.frame},NA,NA,NA"
        gap = "NA" if self.gap_mm is None else f"{self.gap_mm:.3f}"
        return f"{self.frame},{self.hit[0]:.3f},{self.hit[1]:.3f},{gap}"


def analyze_frames(frames, background: Frame, H: Homography, threshold: float,
                   cal: ScaleCalibration, fur_band=(1.0, 255.0), out_size=None) -> list[FrameReport]:
    """Rectify every ``(name, frame)`` and report hit centroid and gap, in input order."""
    bg = warp(background, H, out_size)
    target = centroid(intensity_band(bg, *fur_band))
    reports = []
    for name, frame in frames:
        rect = warp(frame, H, out_size)
        hit = centroid(background_subtract(rect, bg, threshold))
        reports.append(FrameReport(name, hit, target, measure_gap(hit, target, cal)))
    return reports


def analyze_manifest(manifest_path) -> list[FrameReport]:
    """Run the pipeline described by a JSON manifest.

    Keys: ``background`` (PGM file), ``frames`` (list of PGM files; default
    every other ``*.pgm`` in the directory, sorted), ``correspondences``
    (list of ``[[cam_x, cam_y], [view_x, view_y]]``), ``threshold``,
    ``mm_per_pixel``, optional ``fur_band`` and ``output_size``.
    """
    manifest_path = Path(manifest_path)
    try:
        spec = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, manifest_path, exc.lineno) from None
    root = manifest_path.parent
    try:
        bg_name = spec["background"]
        pairs = np.asarray(spec["correspondences"], dtype=float)
        threshold = float(spec["threshold"])
        cal = ScaleCalibration(float(spec["mm_per_pixel"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad manifest: {exc!r}", manifest_path) from None
    if pairs.ndim != 3 or pairs.shape[1:] != (2, 2):
        raise ParseError("correspondences must be a list of [[x, y], [x, y]] pairs", manifest_path)
    names = spec.get("frames") or sorted(p.name for p in root.glob("*.pgm") if p.name != bg_name)
    H = estimate_homography(pairs[:, 0], pairs[:, 1])
    background = read_pgm(root / bg_name)
    out_size = tuple(spec["output_size"]) if spec.get("output_size") else None
    frames = ((name, read_pgm(root / name)) for name in names)
    return analyze_frames(frames, background, H, threshold, cal,
                          tuple(spec.get("fur_band", (1.0, 255.0))), out_size)


# -- synthetic scenes --------------------------------------------------------


def synthetic_fur_view(size_px: int = 200, fur_px: int = 160, level: float = 120.0,
                       texture: float = 10.0) -> np.ndarray:
    """Fronto-parallel fur patch: a smooth textured square on black."""
    img = np.zeros((size_px, size_px))
    o = (size_px - fur_px) // 2
    ys, xs = np.mgrid[0:fur_px, 0:fur_px]
    img[o:o + fur_px, o:o + fur_px] = level + texture * np.sin(xs / 7.0) * np.cos(ys / 11.0)
    return img


def plant_hit(view: np.ndarray, center_xy, radius_px: float = 10.0, boost: float = 50.0) -> np.ndarray:
    """Brighten a disc, as ruffled fur does under a ring impact."""
    ys, xs = np.mgrid[0:view.shape[0], 0:view.shape[1]]
    disc = (xs - center_xy[0]) ** 2 + (ys - center_xy[1]) ** 2 <= radius_px ** 2
    out = view.copy()
    out[disc] += boost
    return np.clip(out, 0, 255)
