"""Configuration space, hardware cost model and feasibility constraints."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable

FREQ_ATOL = 1e-9

DEFAULT_CORE_COUNTS = tuple(range(1, 29))
DEFAULT_FREQUENCIES_GHZ = (1.0, 1.2, 1.5, 1.8, 2.1)
DEFAULT_LIDAR_RATES_HZ = (7, 14)


@dataclass(frozen=True, order=True)
class DesignPoint:
    """One hardware/software configuration.

    Ordering is lexicographic on (cores, core_frequency_ghz, lidar_hz).
    """

    cores: int
    core_frequency_ghz: float
    lidar_hz: int

    def as_tuple(self) -> tuple[int, float, int]:
        return (self.cores, self.core_frequency_ghz, self.lidar_hz)

    def __str__(self) -> str:
        return f"({self.cores} cores, {self.core_frequency_ghz:g} GHz, {self.lidar_hz} Hz)"


def _check_axis(name: str, values: tuple) -> None:
    if not values:
        raise ValueError(f"{name} must be non-empty")
    for a, b in zip(values, values[1:]):
        if not b > a:
            raise ValueError(f"{name} must be strictly increasing and duplicate-free: {values}")


@dataclass(frozen=True)
class DesignSpace:
    core_counts: tuple[int, ...] = DEFAULT_CORE_COUNTS
    frequencies_ghz: tuple[float, ...] = DEFAULT_FREQUENCIES_GHZ
    lidar_rates_hz: tuple[int, ...] = DEFAULT_LIDAR_RATES_HZ

    def __post_init__(self) -> None:
        object.__setattr__(self, "core_counts", tuple(int(c) for c in self.core_counts))
        object.__setattr__(self, "frequencies_ghz", tuple(float(f) for f in self.frequencies_ghz))
        object.__setattr__(self, "lidar_rates_hz", tuple(int(r) for r in self.lidar_rates_hz))
        _check_axis("core_counts", self.core_counts)
        _check_axis("frequencies_ghz", self.frequencies_ghz)
        _check_axis("lidar_rates_hz", self.lidar_rates_hz)

    @property
    def axes(self) -> tuple[tuple, tuple, tuple]:
        return (self.core_counts, self.frequencies_ghz, self.lidar_rates_hz)

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(len(a) for a in self.axes)  # type: ignore[return-value]

    def __len__(self) -> int:
        return math.prod(self.shape)

    def __contains__(self, p: object) -> bool:
        return isinstance(p, DesignPoint) and validate(p, self).ok

    def index_of(self, p: DesignPoint) -> tuple[int, int, int]:
        """Index chromosome (core index, frequency index, lidar index) of ``p``."""
        verdict = validate(p, self)
        if not verdict.ok:
            raise ValueError(verdict.reason)
        ci = self.core_counts.index(p.cores)
        fi = next(i for i, f in enumerate(self.frequencies_ghz) if abs(f - p.core_frequency_ghz) <= FREQ_ATOL)
        li = self.lidar_rates_hz.index(p.lidar_hz)
        return (ci, fi, li)

    def point_at(self, idx: Iterable[int]) -> DesignPoint:
        ci, fi, li = idx
        return DesignPoint(self.core_counts[ci], self.frequencies_ghz[fi], self.lidar_rates_hz[li])

    def to_dict(self) -> dict:
        return {
            "core_counts": list(self.core_counts),
            "frequencies_ghz": list(self.frequencies_ghz),
            "lidar_rates_hz": list(self.lidar_rates_hz),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DesignSpace":
        return cls(
            core_counts=tuple(d.get("core_counts", DEFAULT_CORE_COUNTS)),
            frequencies_ghz=tuple(d.get("frequencies_ghz", DEFAULT_FREQUENCIES_GHZ)),
            lidar_rates_hz=tuple(d.get("lidar_rates_hz", DEFAULT_LIDAR_RATES_HZ)),
        )


@dataclass(frozen=True)
class Constraints:
    max_nav_time_s: float = 400.0
    min_ctrl_rate_hz: float = 1.0

    def __post_init__(self) -> None:
        if not (self.max_nav_time_s > 0 and self.min_ctrl_rate_hz > 0):
            raise ValueError("constraint bounds must be strictly positive")


@dataclass(frozen=True)
class Metrics:
    """Outcome of evaluating one design point.

    ``deviation_score`` is None when the goal was not reached; ``nav_time_s``
    then holds the scenario timeout.
    """

    nav_time_s: float
    deviation_score: float | None
    ctrl_rate_hz: float
    hw_cost: float
    goal_reached: bool

    def __post_init__(self) -> None:
        if self.ctrl_rate_hz < 0:
            raise ValueError("ctrl_rate_hz must be >= 0")
        if not self.hw_cost > 0:
            raise ValueError("hw_cost must be > 0")
        if self.goal_reached:
            if not self.nav_time_s > 0:
                raise ValueError("nav_time_s must be > 0 when the goal was reached")
            if self.deviation_score is None or not 0.0 <= self.deviation_score <= 1.0:
                raise ValueError("deviation_score must lie in [0, 1] when the goal was reached")
        elif self.deviation_score is not None:
            raise ValueError("deviation_score is undefined for incomplete runs")

    def to_dict(self) -> dict:
        return {
            "nav_time_s": self.nav_time_s,
            "deviation_score": self.deviation_score,
            "ctrl_rate_hz": self.ctrl_rate_hz,
            "hw_cost": self.hw_cost,
            "goal_reached": self.goal_reached,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        return cls(
            nav_time_s=float(d["nav_time_s"]),
            deviation_score=None if d.get("deviation_score") is None else float(d["deviation_score"]),
            ctrl_rate_hz=float(d["ctrl_rate_hz"]),
            hw_cost=float(d["hw_cost"]),
            goal_reached=bool(d["goal_reached"]),
        )


@dataclass(frozen=True)
class Verdict:
    ok: bool
    field: str | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def enumerate_space(space: DesignSpace) -> list[DesignPoint]:
    """Full Cartesian product of ``space`` in lexicographic order."""
    return [DesignPoint(c, f, l) for c, f, l in itertools.product(*space.axes)]


def hardware_cost(p: DesignPoint) -> float:
    """CPU-capacity cost proxy: cores times per-core frequency (GHz)."""
    return p.cores * p.core_frequency_ghz


def validate(p: DesignPoint, space: DesignSpace) -> Verdict:
    if p.cores not in space.core_counts:
        return Verdict(False, "cores", f"cores={p.cores} not in {list(space.core_counts)}")
    if not any(abs(f - p.core_frequency_ghz) <= FREQ_ATOL for f in space.frequencies_ghz):
        return Verdict(
            False,
            "core_frequency_ghz",
            f"core_frequency_ghz={p.core_frequency_ghz} not in {list(space.frequencies_ghz)}",
        )
    if p.lidar_hz not in space.lidar_rates_hz:
        return Verdict(False, "lidar_hz", f"lidar_hz={p.lidar_hz} not in {list(space.lidar_rates_hz)}")
    return Verdict(True)


def is_feasible(m: Metrics, c: Constraints) -> bool:
    # time bound inclusive, control-rate bound strict
    return bool(m.goal_reached and m.nav_time_s <= c.max_nav_time_s and m.ctrl_rate_hz > c.min_ctrl_rate_hz)
