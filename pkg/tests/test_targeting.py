import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import euler_zyx_from_matrix, intercept_by_stepping, random_rotation
from vortexcue import targeting as tg
from vortexcue.errors import DegenerateGeometryError, NoInterceptError

angles = st.floats(-180, 180)


def test_normal_conventions():
    np.testing.assert_allclose(tg.aperture_normal((0, 0, 0)), [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(tg.aperture_normal((90, 0, 0)), [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(tg.aperture_normal((0, 90, 0)), [0, 0, -1], atol=1e-15)
    # roll spins about the boresight and leaves it alone
    np.testing.assert_allclose(tg.aperture_normal((30, 10, 77)), tg.aperture_normal((30, 10, 0)), atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(angles, st.floats(-89.9, 89.9), angles)
def test_normal_unit_and_recoverable(yaw, pitch, roll):
    n = tg.aperture_normal((yaw, pitch, roll))
    assert np.linalg.norm(n) == pytest.approx(1.0, abs=1e-12)
    back = tg.aperture_normal(tg.euler_from_normal(n))
    np.testing.assert_allclose(back, n, atol=1e-9)


def _pose(head, euler=(0, 0, 0), avrg=(0, 0, 0), vel=(0, 0, 0)):
    return tg.PoseState(avrg, euler, head, vel)


def test_on_axis():
    r = tg.check_alignment(_pose((1000, 0, 0)))
    assert r.off_axis_distance == 0 and r.boresight_angle == 0 and r.aligned


@pytest.mark.parametrize("rng_mm", [300.0, 1000.0, 2500.0])
def test_boundary_is_aligned(rng_mm):
    r = tg.check_alignment(_pose((rng_mm, 0, 50.0)))
    assert r.off_axis_distance == pytest.approx(50.0, abs=1e-12)
    assert r.aligned
    assert not tg.check_alignment(_pose((rng_mm, 50.001, 0))).aligned


def test_boundary_rotated_device():
    euler = (35.0, -12.0, 4.0)
    n = tg.aperture_normal(euler)
    side = np.cross(n, [0, 0, 1.0])
    side /= np.linalg.norm(side)
    avrg = np.array([100.0, -40.0, 900.0])
    head = avrg + 1500 * n + 50 * side
    assert tg.check_alignment(_pose(head, euler, avrg)).aligned


def test_behind_is_never_aligned():
    assert not tg.check_alignment(_pose((-1000, 0, 0))).aligned
    assert not tg.check_alignment(_pose((-10, 5, 0)), tolerance=1e9).aligned


def test_coincident_is_degenerate():
    with pytest.raises(DegenerateGeometryError):
        tg.check_alignment(_pose((0, 0, 0)))


def test_rigid_invariance():
    rng = np.random.default_rng(11)
    for _ in range(50):
        euler = rng.uniform(-80, 80, 3)
        avrg = rng.uniform(-1000, 1000, 3)
        head = avrg + rng.uniform(-2000, 2000, 3)
        base = tg.check_alignment(_pose(head, euler, avrg))
        R = random_rotation(rng)
        t = rng.uniform(-5000, 5000, 3)
        new_euler = euler_zyx_from_matrix(R @ tg.rotation_matrix(euler))
        moved = tg.check_alignment(_pose(R @ head + t, new_euler, R @ avrg + t))
        assert moved.off_axis_distance == pytest.approx(base.off_axis_distance, abs=1e-9)
        assert moved.boresight_angle == pytest.approx(base.boresight_angle, abs=1e-9)


def test_stationary_intercept():
    aim, t = tg.solve_intercept(_pose((1000, 0, 0)), 0.72)
    assert t == 1.0 / 0.72
    np.testing.assert_array_equal(aim, [1000, 0, 0])


def test_crossing_head():
    aim, t = tg.solve_intercept(_pose((1000, 0, 0), vel=(0, 200, 0)), 0.72)
    # |(1000, 200 t)| = 720 t  =>  t = 1000 / sqrt(720^2 - 200^2)
    assert t == pytest.approx(1000 / math.sqrt(720 ** 2 - 200 ** 2), rel=1e-12)
    assert t == pytest.approx(1.446, abs=1e-3)
    np.testing.assert_allclose(aim, [1000, 289.2, 0], atol=0.05)
    oracle = intercept_by_stepping((1000, 0, 0), (0, 200, 0), (0, 0, 0), 0.72)
    assert abs(oracle - t) < 1e-3


@pytest.mark.parametrize("speed", [720.0, 900.0])
def test_receding_head_cannot_be_caught(speed):
    with pytest.raises(NoInterceptError):
        tg.solve_intercept(_pose((1000, 0, 0), vel=(speed, 0, 0)), 0.72)


def test_intercept_residual_random():
    rng = np.random.default_rng(5)
    for _ in range(500):
        head = rng.uniform(-3000, 3000, 3)
        vel = rng.normal(size=3)
        vel *= rng.uniform(0, 700) / np.linalg.norm(vel)
        aim, t = tg.solve_intercept(_pose(head, vel=vel), 0.72)
        assert t > 0
        np.testing.assert_allclose(aim, head + vel * t, atol=1e-9)
        residual = np.linalg.norm(aim) - 720.0 * t
        assert abs(residual) < 1e-6


def test_arrival_direction_frame():
    # face along +X: a source on the +X axis is straight ahead (90), -Y is right (0)
    assert tg.arrival_direction((0, 0, 0), 0.0, (1000, 0, 0)).theta == pytest.approx(90)
    assert tg.arrival_direction((0, 0, 0), 0.0, (0, -1000, 0)).theta == pytest.approx(0)
    assert tg.arrival_direction((0, 0, 0), 0.0, (0, 1000, 0)).theta == pytest.approx(180)
    back = tg.arrival_direction((0, 0, 0), 0.0, (-1000, 0, 1000 * math.tan(math.radians(30))))
    assert back.theta == pytest.approx(270) and back.phi == pytest.approx(30)


def test_pose_json_roundtrip():
    doc = {"avrg": {"pos_mm": [1, 2, 3], "euler_deg": [10, 0, 0]},
           "head": {"pos_mm": [1000, 0, 0], "vel_mm_s": [0, 5, 0]}}
    pose = tg.PoseState.from_dict(doc)
    assert pose.to_dict() == {"avrg": {"pos_mm": [1.0, 2.0, 3.0], "euler_deg": [10.0, 0.0, 0.0]},
                              "head": {"pos_mm": [1000.0, 0.0, 0.0], "vel_mm_s": [0.0, 5.0, 0.0]}}
