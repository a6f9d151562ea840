from __future__ import annotations

import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from avdse.design_space import (
    Constraints,
    DesignPoint,
    DesignSpace,
    Metrics,
    enumerate_space,
    hardware_cost,
    is_feasible,
    validate,
)

FREQS = (1.0, 1.2, 1.5, 1.8, 2.1)
points = st.builds(DesignPoint, st.integers(1, 28), st.sampled_from(FREQS), st.sampled_from((7, 14)))


@pytest.mark.parametrize(
    "p, cost",
    [
        (DesignPoint(6, 1.5, 7), 9.0),
        (DesignPoint(23, 1.5, 7), 34.5),
        (DesignPoint(18, 1.8, 7), 32.4),
        (DesignPoint(14, 1.2, 7), 16.8),
        (DesignPoint(12, 1.5, 14), 18.0),
    ],
)
def test_hardware_cost_examples(p, cost):
    assert hardware_cost(p) == pytest.approx(cost, abs=1e-12)


def test_cost_ignores_lidar():
    assert hardware_cost(DesignPoint(8, 1.8, 7)) == hardware_cost(DesignPoint(8, 1.8, 14))


def test_default_space_enumerates_280_unique_points():
    pts = enumerate_space(DesignSpace())
    assert len(pts) == 280 == len(DesignSpace())
    assert len(set(pts)) == 280
    assert pts == sorted(pts)


def test_single_point_space():
    assert enumerate_space(DesignSpace((3,), (1.5,), (7,))) == [DesignPoint(3, 1.5, 7)]


def test_enumeration_order():
    assert enumerate_space(DesignSpace((1, 2), (1.0,), (7,))) == [DesignPoint(1, 1.0, 7), DesignPoint(2, 1.0, 7)]


def test_enumeration_is_cartesian_product():
    sp = DesignSpace((2, 5, 9), (1.0, 2.1), (7, 14))
    expected = {DesignPoint(c, f, l) for c, f, l in itertools.product(*sp.axes)}
    assert set(enumerate_space(sp)) == expected
    assert enumerate_space(sp) == enumerate_space(sp)


@pytest.mark.parametrize("bad", [dict(core_counts=()), dict(core_counts=(2, 1)), dict(frequencies_ghz=(1.0, 1.0)), dict(lidar_rates_hz=())])
def test_invalid_space_rejected(bad):
    with pytest.raises(ValueError):
        DesignSpace(**bad)


def test_validate_examples():
    sp = DesignSpace()
    assert validate(DesignPoint(12, 1.5, 14), sp).ok
    v = validate(DesignPoint(0, 1.5, 14), sp)
    assert not v.ok and v.field == "cores"
    v = validate(DesignPoint(4, 1.3, 14), sp)
    assert not v.ok and v.field == "core_frequency_ghz"
    v = validate(DesignPoint(4, 1.2, 10), sp)
    assert not v.ok and v.field == "lidar_hz"


def test_validate_frequency_tolerance():
    assert validate(DesignPoint(4, 1.2 + 1e-12, 14), DesignSpace()).ok
    assert not validate(DesignPoint(4, 1.2 + 1e-6, 14), DesignSpace()).ok


def _m(nav, ctrl, reached=True):
    return Metrics(nav, 0.01 if reached else None, ctrl, 10.0, reached)


def test_feasibility_examples():
    c = Constraints()
    assert not is_feasible(_m(505.43, 2.021), c)
    assert is_feasible(_m(165.04, 7.838), c)
    assert not is_feasible(_m(1248.49, 0.911), c)
    assert not is_feasible(_m(1800.0, 5.0, reached=False), c)


def test_feasibility_boundaries():
    c = Constraints()
    assert is_feasible(_m(400.0, 1.5), c)  # time bound inclusive
    assert not is_feasible(_m(400.0 + 1e-9, 1.5), c)
    assert not is_feasible(_m(100.0, 1.0), c)  # rate bound strict
    assert is_feasible(_m(100.0, 1.0 + 1e-9), c)


@given(st.floats(1.0, 2000.0), st.floats(1.0, 2000.0), st.floats(0.0, 20.0))
def test_feasibility_antitone_in_nav_time(a, b, ctrl):
    lo, hi = min(a, b), max(a, b)
    c = Constraints()
    assert is_feasible(_m(hi, ctrl), c) <= is_feasible(_m(lo, ctrl), c)


@given(st.floats(0.0, 20.0), st.floats(0.0, 20.0), st.floats(1.0, 2000.0))
def test_feasibility_monotone_in_ctrl(a, b, nav):
    lo, hi = min(a, b), max(a, b)
    c = Constraints()
    assert is_feasible(_m(nav, lo), c) <= is_feasible(_m(nav, hi), c)


@given(points)
def test_cost_strictly_monotone(p):
    sp = DesignSpace()
    ci, fi, li = sp.index_of(p)
    if ci + 1 < 28:
        assert hardware_cost(sp.point_at((ci + 1, fi, li))) > hardware_cost(p)
    if fi + 1 < 5:
        assert hardware_cost(sp.point_at((ci, fi + 1, li))) > hardware_cost(p)


@given(points)
def test_index_round_trip(p):
    sp = DesignSpace()
    assert sp.point_at(sp.index_of(p)) == p
    assert p in sp


def test_space_dict_round_trip():
    sp = DesignSpace((1, 4), (1.5, 2.1), (14,))
    assert DesignSpace.from_dict(sp.to_dict()) == sp


@pytest.mark.parametrize(
    "kw",
    [
        dict(nav_time_s=0.0, deviation_score=0.1, ctrl_rate_hz=1.0, hw_cost=1.0, goal_reached=True),
        dict(nav_time_s=10.0, deviation_score=1.5, ctrl_rate_hz=1.0, hw_cost=1.0, goal_reached=True),
        dict(nav_time_s=10.0, deviation_score=0.1, ctrl_rate_hz=-1.0, hw_cost=1.0, goal_reached=True),
        dict(nav_time_s=10.0, deviation_score=0.1, ctrl_rate_hz=1.0, hw_cost=0.0, goal_reached=True),
        dict(nav_time_s=1800.0, deviation_score=0.1, ctrl_rate_hz=1.0, hw_cost=1.0, goal_reached=False),
    ],
)
def test_metrics_invariants(kw):
    with pytest.raises(ValueError):
        Metrics(**kw)


def test_metrics_round_trip():
    m = Metrics(165.04, 0.002615, 7.838, 32.4, True)
    assert Metrics.from_dict(m.to_dict()) == m


def test_constraints_positive():
    with pytest.raises(ValueError):
        Constraints(max_nav_time_s=0)
    with pytest.raises(ValueError):
        Constraints(min_ctrl_rate_hz=-1)
