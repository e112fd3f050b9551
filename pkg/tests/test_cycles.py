"""Driving-cycle parsing and the bundled fixtures."""

import numpy as np
import pytest

from tcsibench.cycles import BUILTIN_CYCLES, CycleError, load_cycle, parse_cycle_csv

EXPECTED_DURATIONS = {"wltp": 1800.0, "nedc": 1220.0, "eudc": 400.0,
                      "ftp75": 1874.0, "synthetic": 60.0}


def test_builtin_durations():
    for name, dur in EXPECTED_DURATIONS.items():
        assert load_cycle(name).duration == dur


def test_builtin_speeds_sane():
    for name in BUILTIN_CYCLES:
        cycle = load_cycle(name)
        assert cycle.speeds_kmh.min() >= 0.0
        assert cycle.speeds_kmh.max() <= 135.0
        assert cycle.speeds_kmh[0] == 0.0


def test_header_optional():
    with_header = parse_cycle_csv("time_s,speed_kmh\n0,0\n1,10\n2,20\n", "a")
    without = parse_cycle_csv("0,0\n1,10\n2,20\n", "b")
    assert np.array_equal(with_header.speeds_kmh, without.speeds_kmh)


def test_interpolation_and_bounds():
    cycle = parse_cycle_csv("0,0\n10,36\n", "ramp")
    assert cycle.speed_kmh_at(5.0) == pytest.approx(18.0)
    assert cycle.speed_ms_at(10.0) == pytest.approx(10.0)
    assert cycle.speed_kmh_at(11.0) == 0.0  # outside the record


def test_sample_accels_central_difference():
    cycle = parse_cycle_csv("0,0\n1,3.6\n2,7.2\n3,7.2\n", "acc")
    a = cycle.sample_accels()
    assert a[0] == pytest.approx(1.0)   # forward difference
    assert a[1] == pytest.approx(1.0)   # central
    assert a[2] == pytest.approx(0.5)
    assert a[3] == pytest.approx(0.0)   # backward


def test_malformed_files_rejected():
    with pytest.raises(CycleError):
        parse_cycle_csv("", "empty")
    with pytest.raises(CycleError):
        parse_cycle_csv("1,0\n2,10\n", "late-start")  # must start at t=0
    with pytest.raises(CycleError):
        parse_cycle_csv("0,0\n0,5\n", "dup")
    with pytest.raises(CycleError):
        parse_cycle_csv("0,0\n1,-4\n", "negative")
    with pytest.raises(CycleError):
        load_cycle("no_such_cycle_name")


def test_load_custom_path(tmp_path):
    path = tmp_path / "mini.csv"
    path.write_text("time_s,speed_kmh\n0,0\n30,50\n60,0\n", encoding="utf-8")
    cycle = load_cycle(str(path))
    assert cycle.name == "mini"
    assert cycle.duration == 60.0
