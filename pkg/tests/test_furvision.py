import numpy as np
import pytest

import furscene
from vortexcue import furvision as fv
from vortexcue.errors import DegenerateGeometryError, InvalidParameterError, ParseError

SQUARE = np.array([[0, 0], [100, 0], [100, 100], [0, 100]], dtype=float)


def test_identity_from_square():
    H = fv.estimate_homography(SQUARE, SQUARE)
    np.testing.assert_allclose(H.matrix, np.eye(3), atol=1e-9)


def test_recovers_known_warp():
    Htrue = np.array([[0.9, 0.1, 12.0], [-0.05, 1.2, -7.0], [4e-4, -2e-4, 1.0]])
    H = fv.estimate_homography(SQUARE, fv.apply_homography(Htrue, SQUARE))
    np.testing.assert_allclose(H.matrix, Htrue, rtol=1e-9, atol=1e-9)
    assert H.rms < 1e-6


def test_random_warps_many_points():
    rng = np.random.default_rng(8)
    for _ in range(50):
        Htrue = furscene.random_homography(rng)
        src = rng.uniform(0, 200, (int(rng.integers(4, 30)), 2))
        H = fv.estimate_homography(src, fv.apply_homography(Htrue, src))
        assert H.rms < 1e-6


def test_collinear_rejected():
    pts = np.array([[0, 0], [50, 50], [100, 100], [0, 100]], dtype=float)
    with pytest.raises(DegenerateGeometryError):
        fv.estimate_homography(pts, SQUARE)
    with pytest.raises(DegenerateGeometryError):
        fv.estimate_homography(SQUARE[:3], SQUARE[:3])
    line = np.column_stack([np.arange(8.0), 2 * np.arange(8.0)])
    with pytest.raises(DegenerateGeometryError):
        fv.estimate_homography(line, line)


def test_singular_matrix_rejected():
    with pytest.raises(DegenerateGeometryError):
        fv.Homography(np.ones((3, 3)))


def _smooth(h=64, w=80):
    ys, xs = np.mgrid[0:h, 0:w]
    return fv.Frame.from_array(128 + 60 * np.sin(xs / 9.0) * np.cos(ys / 7.0))


def test_identity_warp_is_exact():
    f = _smooth()
    out = fv.warp(f, fv.Homography(np.eye(3)))
    assert np.array_equal(out.pixels, f.pixels)


def test_integer_translation():
    f = _smooth()
    T = fv.Homography(np.array([[1, 0, 5], [0, 1, -3], [0, 0, 1.0]]))
    out = fv.warp(f, T).pixels
    assert np.array_equal(out[0:61, 5:80], f.pixels[3:64, 0:75])
    assert np.all(out[:, :5] == 0) and np.all(out[61:, :] == 0)


def test_round_trip_psnr():
    f = _smooth(120, 120)
    H = fv.Homography(np.array([[1.05, 0.04, 3.0], [-0.03, 0.97, 2.0], [1e-4, 5e-5, 1.0]]))
    back = fv.warp(fv.warp(f, H), H.inverse()).pixels
    interior = (slice(15, 105), slice(15, 105))
    mse = np.mean((back[interior] - f.pixels[interior]) ** 2)
    assert 10 * np.log10(255 ** 2 / mse) > 40


def test_background_subtract():
    bg = _smooth()
    assert not fv.background_subtract(bg, bg, 25).any()
    px = bg.pixels.copy()
    px[10:30, 20:40] += 50
    mask = fv.background_subtract(fv.Frame.from_array(px), bg, 25)
    expected = np.zeros_like(mask)
    expected[10:30, 20:40] = True
    assert np.array_equal(mask, expected)
    assert not fv.background_subtract(fv.Frame.from_array(px), bg, 255).any()
    with pytest.raises(InvalidParameterError):
        fv.background_subtract(_smooth(10, 10), bg, 1)


def test_centroid():
    m = np.zeros((50, 50), bool)
    assert fv.centroid(m) is None
    m[20, 10] = True
    assert fv.centroid(m) == (10.0, 20.0)
    m[:] = False
    m[10:21, 30:41] = True
    assert fv.centroid(m) == (35.0, 15.0)


def test_centroid_translation_equivariant():
    rng = np.random.default_rng(2)
    m = np.zeros((80, 80), bool)
    m[10:30, 5:25] = rng.random((20, 20)) > 0.5
    cx, cy = fv.centroid(m)
    for dx, dy in [(3, 7), (40, 0), (0, 45)]:
        shifted = np.roll(np.roll(m, dy, axis=0), dx, axis=1)
        sx, sy = fv.centroid(shifted)
        assert (sx - cx, sy - cy) == pytest.approx((dx, dy), abs=1e-12)


def test_measure_gap():
    cal = fv.ScaleCalibration(1.0)
    assert fv.measure_gap((4, 4), (4, 4), cal) == 0
    assert fv.measure_gap((0, 0), (60, 80), cal) == 100
    assert fv.measure_gap(None, (1, 1), cal) is None
    assert fv.ScaleCalibration.from_extent(160).mm_per_pixel == 5.0


@pytest.mark.parametrize("angle", [0.0, 1.0, 2.5, 4.0])
def test_planted_offsets_recovered(angle):
    offsets = [0, 50, 100, 150]
    for off, rep in zip(offsets, furscene.recover(offsets, angle)):
        assert abs(rep.gap_mm - off) <= furscene.MM_PER_PX


def test_no_hit_is_na():
    bg, _, corners = furscene.camera_frames([])
    H = fv.estimate_homography(corners, furscene.VIEW_CORNERS)
    rep = fv.analyze_frames([("still", bg)], bg, H, 25, fv.ScaleCalibration(5.0), (60, 255), (200, 200))[0]
    assert rep.hit is None and rep.gap_mm is None
    assert rep.line() == "still,NA,NA,NA"


def test_pgm_roundtrip(tmp_path):
    f = fv.Frame.from_array(np.arange(12, dtype=float).reshape(3, 4) * 20)
    fv.write_pgm(tmp_path / "a.pgm", f)
    assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n4 3\n255\n")
    assert np.array_equal(fv.read_pgm(tmp_path / "a.pgm").pixels, f.pixels)


def test_pgm_with_comment(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# cam 1\n2 1\n255\n\x05\xff")
    assert fv.read_pgm(tmp_path / "c.pgm").pixels.tolist() == [[5.0, 255.0]]
    (tmp_path / "t.pgm").write_bytes(b"P5\n2 2\n255\n\x05")
    with pytest.raises(ParseError):
        fv.read_pgm(tmp_path / "t.pgm")
    (tmp_path / "p2.pgm").write_bytes(b"P2\n1 1\n255\n7\n")
    with pytest.raises(ParseError):
        fv.read_pgm(tmp_path / "p2.pgm")


def test_manifest_pipeline(tmp_path):
    manifest, names = furscene.write_sequence(tmp_path, [0, 100])
    reports = fv.analyze_manifest(manifest)
    assert [r.frame for r in reports] == names
    assert abs(reports[1].gap_mm - 100) <= furscene.MM_PER_PX
    lines = [r.line() for r in reports]
    assert lines == [r.line() for r in fv.analyze_manifest(manifest)]
    assert lines[1].startswith("hit01.pgm,") and len(lines[1].split(",")) == 4
