import math
import os
from pathlib import Path

import pytest

import doedr

DATA = Path(os.environ.get("DOEDR_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


def test_flat_power_flow():
    feeder = doedr.load_feeder(str(DATA / "feeder_34bus.cfg"))
    assert len(feeder.buses) == 35
    assert len(feeder.households) == 102
    res = doedr.solve_power_flow(feeder)
    for mags in res["magnitude_pu"].values():
        assert mags == pytest.approx([1.0, 1.0, 1.0], abs=1e-12)


def test_loaded_two_bus():
    feeder = doedr.load_feeder(str(DATA / "feeder_2bus.cfg"))
    res = doedr.solve_power_flow(feeder, [("load", "a", -5.0, -1.0)])
    assert res["magnitude_pu"]["load"][0] < 1.0
    assert res["max_mismatch_pu"] < 1e-8
    with pytest.raises(doedr.InputError):
        doedr.solve_power_flow(feeder, [("src", "a", 1.0, 0.0)])


def test_injection_limits():
    lim = doedr.injection_limits("doe", 2.0, 3.0, 0.5)
    assert lim["p_min"] == pytest.approx(0.5)
    assert lim["p_max"] == pytest.approx(2.5)
    tan = math.tan(math.acos(0.95))
    assert lim["q_max"] == pytest.approx(3.0 * 0.75 - 0.5 * tan)
    passive = doedr.injection_limits("passive", 0.0, 0.0, 1.0)
    assert passive["p_min"] == passive["p_max"] == -1.0


def test_hull_and_halfspace():
    pts = [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0.5)]
    assert doedr.convex_hull(pts) == [(0, 0), (1, 0), (1, 1), (0, 1)]
    a, b, degenerate = doedr.halfspace(pts)
    assert len(a) == len(b) == 4
    assert not degenerate
    _, _, seg = doedr.halfspace([(0, 0), (1, 1)])
    assert seg


def test_comfort_and_admm():
    assert doedr.comfort_interval(23.0, 30.0, 3.0) is not None
    assert doedr.comfort_interval(24.0, 60.0, 0.5) is None
    res = doedr.admm_track([(0, 2.5), (0, 3.0), (0.5, 2.0)], [0.0, 0.0, 0.0], 4.0, eps_prim=1e-10,
                           eps_dual=1e-10, maxiter=5000)
    assert abs(sum(res["dispatch"]) - 4.0) < 1e-3
    assert res["iterations"] <= 5000


def test_toy_study(tmp_path):
    summary = doedr.run_study(DATA / "study_toy.cfg", out=tmp_path, scenarios=50)
    assert summary["control_steps"] == 6
    assert summary["grid_records"] == 60
    assert (tmp_path / "manifest.json").exists()
    with pytest.raises(doedr.ConfigError):
        doedr.run_study(DATA / "missing.cfg")
