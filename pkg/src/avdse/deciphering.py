"""Turn one simulation output into metrics, a performance report and a trajectory verdict."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .design_space import DesignPoint, Metrics, hardware_cost
from .scenario import Polyline, ScenarioSpec
from .trace_analysis import PerformanceReport, build_report
from .trajectory_analysis import TrajectoryThresholds, TrajectoryVerdict, DEFAULT_THRESHOLDS, analyze


@dataclass(frozen=True)
class Deciphered:
    metrics: Metrics
    report: PerformanceReport
    verdict: TrajectoryVerdict


def decipher(
    point: DesignPoint,
    output,
    scenario: ScenarioSpec,
    node_inputs: Mapping[str, Sequence[str]],
    ideal: Polyline | None = None,
    thresholds: TrajectoryThresholds = DEFAULT_THRESHOLDS,
) -> Deciphered:
    report = build_report(output.trace, node_inputs)
    verdict = analyze(output.actual_trajectory, scenario, thresholds, ideal=ideal)
    reached = verdict.completed and report.nav_time_s is not None
    metrics = Metrics(
        nav_time_s=report.nav_time_s if reached else scenario.timeout_s,
        deviation_score=verdict.deviation_score if reached else None,
        ctrl_rate_hz=report.ctrl_rate_hz,
        hw_cost=hardware_cost(point),
        goal_reached=reached,
    )
    return Deciphered(metrics, report, verdict)
