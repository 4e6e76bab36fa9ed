import json

import pytest

import simscene
from conftest import make_grids
from vortexcue import sim
from vortexcue.errors import InvalidParameterError, MissingDataError, ParseError
from vortexcue.sim import Scenario, event_log_text, simulate


def run(data, grids=None):
    return simulate(Scenario.from_dict(data), grids or simscene.one_metre_grids())


def kinds(events):
    return [e.kind for e in events]


def test_on_axis_notice_latency():
    ev = run(simscene.scenario())
    assert kinds(ev) == ["trigger", "launch", "impact", "notice"]
    notice = ev[-1]
    assert notice.payload["latency_s"] == 1.9
    assert notice.time == pytest.approx(0.5 + 1.9)
    impact = ev[2]
    assert impact.payload["flight_s"] == pytest.approx(1 / 0.72)
    assert impact.payload["hit"] is True
    assert notice.payload["perceived_region"] is not None


def test_misaligned_device_never_launches():
    ev = run(simscene.scenario(head=(1000.0, 80.0, 0.0)))
    assert kinds(ev) == ["trigger", "misaligned"]
    assert ev[1].payload["off_axis_mm"] == pytest.approx(80.0)


def test_boundary_offset_is_aligned():
    g = make_grids(simscene.ONE_METRE + "1500,1,1.0,2.0,,", simscene.ACCURATE + "1500,1,0.0,1.0,true")
    ev = run(simscene.scenario(head=(1000.0, 50.0, 0.0)), g)
    assert "launch" in kinds(ev)
    # the range is the straight-line distance, so the timing interpolates toward 1500 mm
    assert ev[-1].payload["latency_s"] == pytest.approx(1.9 + 0.1 * (1000 ** 2 + 50 ** 2) ** 0.5 / 500 - 0.2)


def test_zero_rate_always_misses():
    ev = run(simscene.scenario(b=0.001, count=50))
    terminal = [e for e in ev if e.kind in sim.TERMINAL]
    assert len(terminal) == 50
    assert all(e.kind == "miss" and e.payload["reason"] == "not_noticed" for e in terminal)


def test_unresolvable_cell_names_it():
    with pytest.raises(MissingDataError, match=r"b=0\.002"):
        run(simscene.scenario(b=0.002))
    with pytest.raises(MissingDataError, match="1000"):
        run(simscene.scenario(), make_grids(simscene.ONE_METRE))


def test_no_intercept():
    ev = run(simscene.scenario(vel=(800.0, 0.0, 0.0)))
    assert kinds(ev) == ["trigger", "miss"]
    assert ev[1].payload["reason"] == "no_intercept"


def test_wide_miss_is_off_target():
    g = make_grids(simscene.ONE_METRE, "1000,1,600.0,1.0,true")
    ev = run(simscene.scenario(), g)
    assert ev[-1].kind == "miss" and ev[-1].payload["reason"] == "off_target"


def test_log_byte_identical():
    data = simscene.scenario(b=0.004, count=200)
    a = event_log_text(run(data))
    b = event_log_text(run(json.loads(json.dumps(data))))
    assert a == b
    assert a != event_log_text(run(simscene.scenario(b=0.004, count=200, seed=8)))
    for line in a.splitlines():
        json.loads(line)


def test_rings_do_not_share_draws():
    """Adding a trigger leaves the earlier trigger's rings untouched."""
    one = simscene.scenario(b=0.004, count=30)
    two = json.loads(json.dumps(one))
    two["triggers"].append({"time_s": 0.7, "device": "a", "target": "p", "b": 1, "count": 5})
    first = [e for e in run(two) if e.ring[0] == 0]
    assert event_log_text(first) == event_log_text(run(one))


def test_ordering_and_causality():
    ev = run(simscene.scenario(b=0.004, count=40))
    times = [e.time for e in ev]
    assert times == sorted(times)
    per_ring = {}
    for e in ev:
        per_ring.setdefault(e.ring, []).append(e)
    assert len(per_ring) == 40
    for ring, evs in per_ring.items():
        ks = kinds(evs)
        assert ks[:3] == ["trigger", "launch", "impact"]
        assert sum(k in sim.TERMINAL for k in ks) == 1 and ks[-1] in sim.TERMINAL
        assert [e.time for e in evs] == sorted(e.time for e in evs)


def test_rate_reproduction():
    ev = run(simscene.scenario(b=0.004, count=10_000))
    notices = sum(e.kind == "notice" for e in ev)
    assert notices / 10_000 == pytest.approx(0.6, abs=0.02)


def test_std_override_for_grids_without_spread():
    g = make_grids("2000,1,1.0,2.0,,", "2000,1,100.0,,true")
    data = simscene.scenario(head=(2000.0, 0.0, 0.0))
    with pytest.raises(MissingDataError):
        run(data, g)
    data["accuracy_std_mm"] = 20.0
    assert "impact" in kinds(run(data, g))


def test_scenario_validation(tmp_path):
    bad = simscene.scenario()
    bad["version"] = 2
    with pytest.raises(InvalidParameterError):
        Scenario.from_dict(bad)
    for patch in ({"b": 2}, {"count": 0}, {"count": 2, "interval_s": 0}, {"time_s": -1},
                  {"device": "zz"}, {"target": "zz"}):
        d = simscene.scenario()
        d["triggers"][0].update(patch)
        with pytest.raises(InvalidParameterError):
            Scenario.from_dict(d)
    d = simscene.scenario()
    del d["devices"][0]["pos_mm"]
    with pytest.raises(InvalidParameterError):
        Scenario.from_dict(d)
    (tmp_path / "s.json").write_text("{\n  oops")
    with pytest.raises(ParseError) as info:
        sim.load_scenario(tmp_path / "s.json")
    assert info.value.line == 2
    (tmp_path / "ok.json").write_text(json.dumps(simscene.scenario()))
    assert sim.load_scenario(tmp_path / "ok.json").seed == 7
