"""Geometric trajectory assessment: goal check, deviation score, qualitative flags."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .scenario import Point2D, Polyline, ScenarioSpec, ideal_trajectory


class NavStatus(str, enum.Enum):
    COMPLETED = "navigation_completed"
    INCOMPLETE = "navigation_incomplete"


class QualityFlag(str, enum.Enum):
    ZIG_ZAG = "zig_zag"
    JITTER = "jitter"
    LANE_DEPARTURE_RISK = "lane_departure_risk"


@dataclass(frozen=True)
class TrajectoryThresholds:
    resample_points: int = 256
    goal_tolerance_m: float = 2.0
    lane_width_m: float = 4.0
    zigzag_reversals_per_100m: float = 4.0
    jitter_rad_per_m: float = 0.15
    heading_deadband_rad: float = 0.01
    # sample spacing for the heading analysis
    quality_spacing_m: float = 1.0


DEFAULT_THRESHOLDS = TrajectoryThresholds()


@dataclass(frozen=True)
class TrajectoryVerdict:
    status: NavStatus
    deviation_score: float | None
    quality_flags: frozenset[QualityFlag]
    narrative: str

    def __post_init__(self) -> None:
        if (self.deviation_score is not None) != (self.status is NavStatus.COMPLETED):
            raise ValueError("deviation_score is present iff navigation completed")

    @property
    def completed(self) -> bool:
        return self.status is NavStatus.COMPLETED

    def flag_names(self) -> list[str]:
        return sorted(f.value for f in self.quality_flags)

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "deviation_score": self.deviation_score,
            "quality_flags": self.flag_names(),
            "narrative": self.narrative,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryVerdict":
        return cls(
            status=NavStatus(d["status"]),
            deviation_score=d["deviation_score"],
            quality_flags=frozenset(QualityFlag(f) for f in d["quality_flags"]),
            narrative=d["narrative"],
        )


def goal_reached(actual: Polyline, goal: Point2D, tolerance_m: float = DEFAULT_THRESHOLDS.goal_tolerance_m) -> bool:
    x, y = actual.xy[-1]
    return math.hypot(x - goal.x, y - goal.y) <= tolerance_m


def deviation_score(
    actual: Polyline,
    ideal: Polyline,
    d_norm: float,
    m: int = DEFAULT_THRESHOLDS.resample_points,
) -> float:
    """Mean distance between arc-length-matched samples, divided by ``d_norm`` and clamped to [0, 1]."""
    if not d_norm > 0:
        raise ValueError("d_norm must be positive")
    a = actual.resample(m)
    b = ideal.resample(m)
    mean = float(np.mean(np.hypot(*(a - b).T)))
    return min(1.0, max(0.0, mean / d_norm))


def _turning_angles(xy: np.ndarray) -> np.ndarray:
    d = np.diff(xy, axis=0)
    heading = np.arctan2(d[:, 1], d[:, 0])
    turn = np.diff(heading)
    return (turn + np.pi) % (2 * np.pi) - np.pi


def lateral_offsets(actual: Polyline, ideal: Polyline) -> np.ndarray:
    """Distance from each actual vertex to the nearest point of ``ideal``."""
    a = ideal.xy[:-1]
    d = np.diff(ideal.xy, axis=0)
    seg_len2 = np.einsum("ij,ij->i", d, d)
    q = actual.xy[:, None, :]
    t = np.clip(np.einsum("kij,ij->ki", q - a, d) / seg_len2, 0.0, 1.0)
    foot = a + t[..., None] * d
    return np.min(np.hypot(*(foot - q).transpose(2, 0, 1)), axis=1)


def quality_flags(
    actual: Polyline,
    ideal: Polyline | None = None,
    thresholds: TrajectoryThresholds = DEFAULT_THRESHOLDS,
) -> frozenset[QualityFlag]:
    if len(actual) < 3:
        raise ValueError("quality analysis needs at least three points")
    length = actual.arc_length()
    n = max(3, int(round(length / thresholds.quality_spacing_m)) + 1)
    xy = actual.resample(n)
    turns = _turning_angles(xy)
    flags = set()
    reversals = kernels.count_sign_reversals(turns, thresholds.heading_deadband_rad)
    if reversals / length * 100.0 > thresholds.zigzag_reversals_per_100m:
        flags.add(QualityFlag.ZIG_ZAG)
    if float(np.sum(np.abs(turns))) / length > thresholds.jitter_rad_per_m:
        flags.add(QualityFlag.JITTER)
    if ideal is not None and float(lateral_offsets(actual, ideal).max()) > thresholds.lane_width_m / 2:
        flags.add(QualityFlag.LANE_DEPARTURE_RISK)
    return frozenset(flags)


def _narrative(status: NavStatus, score: float | None, flags: frozenset[QualityFlag]) -> str:
    if status is NavStatus.COMPLETED:
        head = f"Navigation Completed: the vehicle reached the goal point (normalized deviation score: {score:.6f})."
    else:
        head = "Navigation Incomplete: the vehicle did not reach the goal point before the timeout."
    if not flags:
        body = "Trajectory is stable and smooth with no zig-zag, jitter or lane departure."
    else:
        words = {
            QualityFlag.ZIG_ZAG: "zig-zag motion",
            QualityFlag.JITTER: "heading jitter",
            QualityFlag.LANE_DEPARTURE_RISK: "risk of crossing the adjacent lane",
        }
        body = "Trajectory shows " + " and ".join(words[f] for f in sorted(flags, key=lambda f: f.value)) + "."
    return f"{head} {body}"


def analyze(
    actual: Polyline,
    s: ScenarioSpec,
    thresholds: TrajectoryThresholds = DEFAULT_THRESHOLDS,
    ideal: Polyline | None = None,
) -> TrajectoryVerdict:
    if ideal is None:
        ideal = ideal_trajectory(s)
    reached = goal_reached(actual, s.goal, thresholds.goal_tolerance_m)
    status = NavStatus.COMPLETED if reached else NavStatus.INCOMPLETE
    score = deviation_score(actual, ideal, s.map_diagonal_m, thresholds.resample_points) if reached else None
    flags = quality_flags(actual, ideal, thresholds) if len(actual) >= 3 else frozenset()
    return TrajectoryVerdict(status, score, flags, _narrative(status, score, flags))
