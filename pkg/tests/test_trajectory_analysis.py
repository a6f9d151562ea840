from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avdse.design_space import Constraints, DesignPoint
from avdse.scenario import Point2D, Polyline, ScenarioSpec, Task
from avdse.trajectory_analysis import (
    NavStatus,
    QualityFlag,
    TrajectoryVerdict,
    analyze,
    deviation_score,
    goal_reached,
    quality_flags,
)
from avdse.vehicle_model import simulate


def straight(n: int = 101, length: float = 100.0, offset: float = 0.0) -> Polyline:
    x = np.linspace(0.0, length, n)
    return Polyline(np.stack([x, np.full_like(x, offset)], axis=1))


def zigzag(amplitude: float = 0.5, wavelength: float = 20.0, length: float = 100.0) -> Polyline:
    # inflections (heading-turn sign changes) at x = 5, 15, ..., 95: ten reversals over 100 m
    x = np.linspace(0.0, length, 1001)
    return Polyline(np.stack([x, amplitude * np.sin(2 * np.pi * (x - 5.0) / wavelength)], axis=1))


def test_goal_reached_examples():
    path = straight()
    assert goal_reached(path, Point2D(100.0, 0.0), 2.0)
    assert not goal_reached(path, Point2D(110.0, 0.0), 2.0)
    assert goal_reached(path, Point2D(101.99, 0.0), 2.0)


@given(st.floats(0, 50), st.floats(0, 50), st.floats(-30, 30), st.floats(-30, 30))
def test_goal_reached_monotone_in_tolerance(t1, t2, gx, gy):
    lo, hi = sorted((t1, t2))
    path = straight()
    assert goal_reached(path, Point2D(100 + gx, gy), lo) <= goal_reached(path, Point2D(100 + gx, gy), hi)


def test_identical_scores_zero():
    assert deviation_score(straight(), straight(), 143.05) == 0.0


def test_constant_offset_score():
    assert deviation_score(straight(offset=1.4305), straight(), 143.05) == pytest.approx(0.01, abs=1e-6)


def test_resampling_ignores_vertex_density():
    assert deviation_score(straight(n=7, offset=1.0), straight(n=300), 10.0) == pytest.approx(0.1, abs=1e-9)


def test_far_deviation_clamped():
    assert deviation_score(straight(offset=500.0), straight(), 143.05) == 1.0


def test_bundled_map_normalizer(scenario):
    assert scenario.map_diagonal_m == pytest.approx(math.hypot(87.527 + 20.973, 35.428 + 56.072), abs=1e-9)


def test_straight_has_no_flags():
    assert quality_flags(straight(), straight()) == frozenset()


def test_sinusoid_is_zigzag():
    assert quality_flags(zigzag(), straight()) == {QualityFlag.ZIG_ZAG}


def test_offset_is_lane_departure_risk():
    assert quality_flags(straight(offset=3.0), straight()) == {QualityFlag.LANE_DEPARTURE_RISK}


def test_tight_wiggle_is_jitter():
    assert QualityFlag.JITTER in quality_flags(zigzag(amplitude=1.0, wavelength=6.0), straight())


def test_quality_needs_three_points():
    with pytest.raises(ValueError):
        quality_flags(Polyline([(0, 0), (1, 0)]))


polylines = st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), min_size=2, max_size=8).filter(
    lambda pts: np.hypot(*np.diff(np.array(pts), axis=0).T).min() > 1e-2
)


@settings(max_examples=150)
@given(polylines, polylines)
def test_deviation_symmetric(a, b):
    pa, pb = Polyline(a), Polyline(b)
    assert deviation_score(pa, pb, 100.0) == pytest.approx(deviation_score(pb, pa, 100.0), abs=1e-12)


@settings(max_examples=150)
@given(polylines, polylines, st.floats(0, 2 * math.pi), st.floats(-100, 100), st.floats(-100, 100))
def test_deviation_rigid_invariance(a, b, theta, dx, dy):
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])

    def move(pts):
        return Polyline(np.array(pts) @ rot.T + [dx, dy])

    before = deviation_score(Polyline(a), Polyline(b), 1000.0)
    assert deviation_score(move(a), move(b), 1000.0) == pytest.approx(before, abs=1e-9)


@settings(max_examples=100)
@given(polylines)
def test_deviation_zero_iff_coincident(a):
    pa = Polyline(a)
    assert deviation_score(pa, pa, 1.0) == 0.0
    shifted = Polyline(np.array(a) + [0.0, 1e-3])
    assert deviation_score(pa, shifted, 1.0) > 0.0


def line_scenario() -> ScenarioSpec:
    return ScenarioSpec(
        Task.LANE_DRIVING, "line", Polyline([(0, 0), (100, 0)]), Point2D(0, 0), Point2D(100, 0), 30.0, Constraints(), 1800.0
    )


def test_analyze_smooth_completed():
    v = analyze(straight(), line_scenario())
    assert v.status is NavStatus.COMPLETED and v.deviation_score == pytest.approx(0.0)
    assert v.quality_flags == frozenset() and "stable" in v.narrative


def test_analyze_timeout():
    v = analyze(straight(length=60.0), line_scenario())
    assert v.status is NavStatus.INCOMPLETE and v.deviation_score is None
    assert "Incomplete" in v.narrative


def test_analyze_zigzag_completed():
    v = analyze(zigzag(), line_scenario())
    assert v.completed and v.quality_flags == {QualityFlag.ZIG_ZAG}
    assert "zig-zag" in v.narrative


def test_verdict_invariant_and_round_trip():
    with pytest.raises(ValueError):
        TrajectoryVerdict(NavStatus.INCOMPLETE, 0.1, frozenset(), "")
    v = analyze(zigzag(), line_scenario())
    assert TrajectoryVerdict.from_dict(v.to_dict()) == v


@pytest.mark.parametrize("p", [DesignPoint(1, 1.0, 7), DesignPoint(4, 1.2, 14), DesignPoint(18, 1.8, 7), DesignPoint(28, 2.1, 14)])
def test_verdict_agrees_with_model(scenario, ideal, p):
    out = simulate(p, scenario, 1)
    assert analyze(out.actual_trajectory, scenario, ideal=ideal).completed == out.completed


def test_low_control_rate_degrades_trajectory(scenario, ideal):
    slow = analyze(simulate(DesignPoint(3, 1.5, 7), scenario, 1).actual_trajectory, scenario, ideal=ideal)
    fast = analyze(simulate(DesignPoint(28, 2.1, 7), scenario, 1).actual_trajectory, scenario, ideal=ideal)
    assert slow.completed and fast.completed
    assert slow.deviation_score > fast.deviation_score
