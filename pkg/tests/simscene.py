"""Scenario and grid builders shared by the simulator and CLI tests."""

from conftest import make_grids

ONE_METRE = """
    1000,1,1.0,1.9,6,4
    1000,0.004,0.6,,,
    1000,0.001,0.0,,,
"""
ACCURATE = """
    1000,1,0.0,1.0,true
    1000,0.004,0.0,1.0,true
    1000,0.001,0.0,1.0,true
"""


def one_metre_grids():
    return make_grids(ONE_METRE, ACCURATE)


def scenario(b=1.0, head=(1000.0, 0.0, 0.0), count=1, seed=7, vel=(0.0, 0.0, 0.0), facing=90.0, **extra):
    data = {
        "version": 1,
        "seed": seed,
        "devices": [{"id": "a", "pos_mm": [0, 0, 0], "euler_deg": [0, 0, 0]}],
        "targets": [{"id": "p", "pos_mm": list(head), "vel_mm_s": list(vel), "facing_deg": facing}],
        "triggers": [{"time_s": 0.5, "device": "a", "target": "p", "b": b, "count": count,
                      "interval_s": 1.0}],
    }
    data.update(extra)
    return data
