"""Long-term memory: append-only JSON-lines store of evaluated design points."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .design_space import Constraints, DesignPoint, Metrics, is_feasible


@dataclass(frozen=True)
class MemoryRecord:
    iteration: int
    point: DesignPoint
    metrics: Metrics
    bottleneck_flags: frozenset[str]
    verdict: dict  # status, deviation_score, quality_flags, narrative
    rationale: str
    cached: bool = False

    def __post_init__(self) -> None:
        completed = self.verdict.get("status") == "navigation_completed"
        if self.metrics.goal_reached and not completed:
            raise ValueError("goal_reached metrics require a completed verdict")

    def feasible(self, constraints: Constraints) -> bool:
        return is_feasible(self.metrics, constraints)

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "point": {
                "cores": self.point.cores,
                "core_frequency_ghz": self.point.core_frequency_ghz,
                "lidar_hz": self.point.lidar_hz,
            },
            "metrics": self.metrics.to_dict(),
            "bottleneck_flags": sorted(self.bottleneck_flags),
            "verdict": self.verdict,
            "rationale": self.rationale,
            "cached": self.cached,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MemoryRecord":
        p = d["point"]
        return cls(
            iteration=int(d["iteration"]),
            point=DesignPoint(int(p["cores"]), float(p["core_frequency_ghz"]), int(p["lidar_hz"])),
            metrics=Metrics.from_dict(d["metrics"]),
            bottleneck_flags=frozenset(d["bottleneck_flags"]),
            verdict=dict(d["verdict"]),
            rationale=d["rationale"],
            cached=bool(d.get("cached", False)),
        )

    def reference_line(self) -> str:
        """One-line rendering used in prompt reference blocks."""
        p, m = self.point, self.metrics
        score = "n/a" if m.deviation_score is None else f"{m.deviation_score:.6f}"
        return (
            f"number_of_cores = {p.cores}, core_frequency = {p.core_frequency_ghz:g}, lidar_frequency = {p.lidar_hz} -> "
            f"navigation_time = {m.nav_time_s:.2f}, car_trajectory_normalized_score = {score}, "
            f"control_command_issue_rates = {m.ctrl_rate_hz:.3f}, hardware_cost = {m.hw_cost:g}"
        )


class MemoryStore:
    """In-memory history mirrored to an optional JSON-lines file, append-only."""

    def __init__(self, path: str | os.PathLike | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._records: list[MemoryRecord] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("", encoding="utf-8")

    def append(self, record: MemoryRecord) -> None:
        if self._records and record.iteration <= self._records[-1].iteration:
            raise ValueError("iteration indices must be strictly increasing")
        self._records.append(record)
        if self.path is not None:
            with self.path.open("a", encoding="utf-8") as fp:
                fp.write(record.to_json() + "\n")

    @property
    def records(self) -> tuple[MemoryRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[MemoryRecord]:
        return iter(self._records)

    def digest(self) -> str:
        h = hashlib.sha256()
        for r in self._records:
            h.update(r.to_json().encode("utf-8"))
        return h.hexdigest()

    @staticmethod
    def load(path: str | os.PathLike) -> list[MemoryRecord]:
        with open(path, encoding="utf-8") as fp:
            return [MemoryRecord.from_dict(json.loads(line)) for line in fp if line.strip()]


def evaluated_points(history: Sequence[MemoryRecord]) -> set[DesignPoint]:
    return {r.point for r in history}


def select_references(
    memory: Sequence[MemoryRecord], k_recent: int = 3, cap: int = 6, constraints: Constraints = Constraints()
) -> list[MemoryRecord]:
    """Curated subset: cost extremes, nav-time extremes and the most recent records.

    The lowest-nav-time pick is taken among feasible records; picks are
    deduplicated, capped at ``cap`` (extremes first) and returned in iteration order.
    """
    if not memory:
        return []
    recs = list(memory)
    picks: list[MemoryRecord] = [
        min(recs, key=lambda r: (r.metrics.hw_cost, r.iteration)),
        max(recs, key=lambda r: (r.metrics.hw_cost, -r.iteration)),
    ]
    feasible = [r for r in recs if r.feasible(constraints)]
    if feasible:
        picks.append(min(feasible, key=lambda r: (r.metrics.nav_time_s, r.iteration)))
    picks.append(max(recs, key=lambda r: (r.metrics.nav_time_s, -r.iteration)))
    picks.extend(recs[-k_recent:][::-1] if k_recent > 0 else [])
    chosen: dict[int, MemoryRecord] = {}
    for r in picks:
        if len(chosen) >= cap:
            break
        chosen.setdefault(r.iteration, r)
    return sorted(chosen.values(), key=lambda r: r.iteration)
