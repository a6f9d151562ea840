"""Pareto-front extraction over (navigation time, hardware cost) and budgeted-search scoring."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .design_space import Constraints, DesignPoint, Metrics, is_feasible

CSV_COLUMNS = ("cores", "freq_ghz", "lidar_hz", "nav_time_s", "hw_cost", "feasible", "on_truth_front", "found_by")


@dataclass(frozen=True)
class ObjectivePoint:
    nav_time_s: float
    hw_cost: float
    source: DesignPoint

    def __post_init__(self) -> None:
        for name in ("nav_time_s", "hw_cost"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v}")

    @classmethod
    def from_metrics(cls, p: DesignPoint, m: Metrics) -> "ObjectivePoint":
        return cls(m.nav_time_s, m.hw_cost, p)


def dominates(a: ObjectivePoint, b: ObjectivePoint) -> bool:
    return (
        a.nav_time_s <= b.nav_time_s
        and a.hw_cost <= b.hw_cost
        and (a.nav_time_s < b.nav_time_s or a.hw_cost < b.hw_cost)
    )


def pareto_mask(nav: Sequence[float], cost: Sequence[float]) -> np.ndarray:
    return kernels.pareto_mask(np.asarray(nav, dtype=float), np.asarray(cost, dtype=float))


def pareto_front(points: Sequence[ObjectivePoint]) -> list[ObjectivePoint]:
    """Non-dominated subset, in input order; objective-space duplicates are all kept."""
    if not points:
        return []
    mask = pareto_mask([p.nav_time_s for p in points], [p.hw_cost for p in points])
    return [p for p, keep in zip(points, mask) if keep]


def feasible_objectives(
    evaluations: Iterable[tuple[DesignPoint, Metrics]], constraints: Constraints
) -> list[ObjectivePoint]:
    return [ObjectivePoint.from_metrics(p, m) for p, m in evaluations if is_feasible(m, constraints)]


def truth_front(evaluations: Iterable[tuple[DesignPoint, Metrics]], constraints: Constraints) -> list[ObjectivePoint]:
    return pareto_front(feasible_objectives(evaluations, constraints))


def front_hits(found: Iterable[ObjectivePoint | DesignPoint], truth: Iterable[ObjectivePoint]) -> int:
    """Number of distinct found design points that lie on the truth front."""
    truth_sources = {t.source for t in truth}
    seen = {f.source if isinstance(f, ObjectivePoint) else f for f in found}
    return len(seen & truth_sources)


def first_hit_iteration(sequence: Sequence[DesignPoint], truth: Iterable[ObjectivePoint]) -> int | None:
    """1-based index of the first evaluated point on the truth front, or None."""
    truth_sources = {t.source for t in truth}
    for i, p in enumerate(sequence, start=1):
        if p in truth_sources:
            return i
    return None


def emit_plot_data(
    evaluations: Sequence[tuple[DesignPoint, Metrics]],
    front: Iterable[ObjectivePoint],
    found: Mapping[DesignPoint, str] | None,
    constraints: Constraints,
) -> str:
    """CSV with one row per evaluation; ``found`` maps a design point to the strategy label that found it."""
    front_sources = {f.source for f in front}
    found = found or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p, m in evaluations:
        w.writerow(
            [
                p.cores,
                f"{p.core_frequency_ghz:g}",
                p.lidar_hz,
                repr(m.nav_time_s),
                repr(m.hw_cost),
                str(is_feasible(m, constraints)).lower(),
                str(p in front_sources).lower(),
                found.get(p, ""),
            ]
        )
    return buf.getvalue()
