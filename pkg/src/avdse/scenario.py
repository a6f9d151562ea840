"""Task definition (map, start/goal, speed, constraints) and the ideal trajectory."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import yaml

from .design_space import Constraints

SNAP_DISTANCE_M = 2.0


class ScenarioError(ValueError):
    """Invalid scenario definition."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None) -> None:
        self.field = field
        self.line = line
        prefix = ""
        if line is not None:
            prefix = f"line {line}: "
        if field is not None:
            prefix += f"{field}: "
        super().__init__(prefix + message)


class NoPathError(ValueError):
    pass


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinate ({self.x}, {self.y})")

    def distance_to(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


class Polyline:
    """Ordered 2-D vertices; ``closed`` adds an implicit last-to-first segment."""

    __slots__ = ("_xy", "closed")

    def __init__(self, points: Iterable[Point2D] | np.ndarray | Sequence[Sequence[float]], closed: bool = False):
        if isinstance(points, np.ndarray):
            xy = np.array(points, dtype=float)
        else:
            pts = list(points)
            xy = np.array([(p.x, p.y) if isinstance(p, Point2D) else tuple(p) for p in pts], dtype=float)
        if xy.ndim != 2 or xy.shape[1] != 2 or len(xy) < 2:
            raise ValueError("a polyline needs at least two 2-D points")
        if not np.all(np.isfinite(xy)):
            raise ValueError("polyline coordinates must be finite")
        if np.any(np.all(np.diff(xy, axis=0) == 0.0, axis=1)):
            raise ValueError("consecutive polyline points must be distinct")
        if closed and np.array_equal(xy[0], xy[-1]):
            raise ValueError("closed polyline must not repeat its first point")
        xy.setflags(write=False)
        self._xy = xy
        self.closed = bool(closed)
        if not self.arc_length() > 0:
            raise ValueError("polyline arc length must be positive")

    @property
    def xy(self) -> np.ndarray:
        return self._xy

    @property
    def points(self) -> list[Point2D]:
        return [Point2D(float(x), float(y)) for x, y in self._xy]

    def __len__(self) -> int:
        return len(self._xy)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Polyline) and self.closed == other.closed and np.array_equal(self._xy, other._xy)

    def __hash__(self) -> int:
        return hash((self._xy.tobytes(), self.closed))

    def __repr__(self) -> str:
        return f"Polyline({len(self)} points, closed={self.closed}, length={self.arc_length():.3f})"

    def vertices(self) -> np.ndarray:
        """Vertices including the closing point for closed polylines."""
        if self.closed:
            return np.vstack([self._xy, self._xy[:1]])
        return self._xy

    def cumulative(self) -> np.ndarray:
        seg = np.hypot(*np.diff(self.vertices(), axis=0).T)
        return np.concatenate([[0.0], np.cumsum(seg)])

    def arc_length(self) -> float:
        return float(self.cumulative()[-1])

    def bounds(self) -> tuple[float, float, float, float]:
        xmin, ymin = self._xy.min(axis=0)
        xmax, ymax = self._xy.max(axis=0)
        return (float(xmin), float(ymin), float(xmax), float(ymax))

    def project(self, p: Point2D) -> tuple[float, float]:
        """Arc position of the nearest point on the polyline and the distance to it."""
        v = self.vertices()
        a, b = v[:-1], v[1:]
        d = b - a
        seg_len2 = np.einsum("ij,ij->i", d, d)
        q = np.array([p.x, p.y])
        t = np.clip(np.einsum("ij,ij->i", q - a, d) / seg_len2, 0.0, 1.0)
        foot = a + t[:, None] * d
        dist = np.hypot(*(foot - q).T)
        k = int(np.argmin(dist))
        cum = self.cumulative()
        return float(cum[k] + t[k] * math.sqrt(seg_len2[k])), float(dist[k])

    def point_at(self, s: np.ndarray | float) -> np.ndarray:
        """Coordinates at arc positions ``s`` (clipped to the polyline)."""
        cum = self.cumulative()
        v = self.vertices()
        s = np.clip(np.asarray(s, dtype=float), 0.0, cum[-1])
        return np.stack([np.interp(s, cum, v[:, 0]), np.interp(s, cum, v[:, 1])], axis=-1)

    def resample(self, m: int) -> np.ndarray:
        """``m`` points uniformly spaced in arc length, endpoints included."""
        return self.point_at(np.linspace(0.0, self.arc_length(), m))


def arc_length(p: Polyline) -> float:
    return p.arc_length()


class Task(str, enum.Enum):
    LANE_DRIVING = "lane_driving"
    AUTOMATED_VALET_PARKING = "automated_valet_parking"


@dataclass(frozen=True)
class ScenarioSpec:
    task: Task
    map_id: str
    centerline: Polyline
    start: Point2D
    goal: Point2D
    cruise_speed_kmh: float
    constraints: Constraints
    timeout_s: float
    # (xmin, ymin, xmax, ymax) of the map extent; defaults to the centerline bounding box
    map_bounds: tuple[float, float, float, float] | None = None

    def __post_init__(self) -> None:
        if not self.cruise_speed_kmh > 0:
            raise ScenarioError("must be positive", "cruise_speed_kmh")
        if not self.timeout_s > self.constraints.max_nav_time_s:
            raise ScenarioError("must exceed constraints.max_nav_time_s", "timeout_s")
        if self.start == self.goal:
            raise ScenarioError("start and goal coincide", "goal")
        for name, pt in (("start", self.start), ("goal", self.goal)):
            _, dist = self.centerline.project(pt)
            if dist > SNAP_DISTANCE_M:
                raise ScenarioError(f"{dist:.3f} m from the centerline (snap distance {SNAP_DISTANCE_M} m)", name)
        if self.map_bounds is None:
            object.__setattr__(self, "map_bounds", self.centerline.bounds())

    @property
    def cruise_speed_mps(self) -> float:
        return self.cruise_speed_kmh / 3.6

    @property
    def map_diagonal_m(self) -> float:
        xmin, ymin, xmax, ymax = self.map_bounds  # type: ignore[misc]
        return math.hypot(xmax - xmin, ymax - ymin)

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "map_id": self.map_id,
            "centerline": {"closed": self.centerline.closed, "points": self.centerline.xy.tolist()},
            "map_bounds": list(self.map_bounds),  # type: ignore[arg-type]
            "start": [self.start.x, self.start.y],
            "goal": [self.goal.x, self.goal.y],
            "cruise_speed_kmh": self.cruise_speed_kmh,
            "timeout_s": self.timeout_s,
            "constraints": {
                "max_nav_time_s": self.constraints.max_nav_time_s,
                "min_ctrl_rate_hz": self.constraints.min_ctrl_rate_hz,
            },
        }


def _point(value, name: str) -> Point2D:
    if isinstance(value, dict):
        value = (value.get("x"), value.get("y"))
    try:
        x, y = value
        return Point2D(float(x), float(y))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"expected [x, y], got {value!r}", name) from exc


def scenario_from_dict(d: dict) -> ScenarioSpec:
    """Build a validated ScenarioSpec from an already-parsed mapping."""
    if not isinstance(d, dict):
        raise ScenarioError("scenario section must be a mapping")
    missing = [k for k in ("task", "map_id", "centerline", "start", "goal", "cruise_speed_kmh") if k not in d]
    if missing:
        raise ScenarioError("missing required key(s): " + ", ".join(missing))
    try:
        task = Task(d["task"])
    except ValueError as exc:
        raise ScenarioError(f"unknown task {d['task']!r}", "task") from exc
    cl = d["centerline"]
    if isinstance(cl, dict):
        pts, closed = cl.get("points"), bool(cl.get("closed", False))
    else:
        pts, closed = cl, False
    try:
        centerline = Polyline([_point(p, "centerline") for p in pts or []], closed=closed)
    except ValueError as exc:
        raise ScenarioError(str(exc), "centerline") from exc
    cons = d.get("constraints", {}) or {}
    try:
        constraints = Constraints(
            max_nav_time_s=float(cons.get("max_nav_time_s", 400.0)),
            min_ctrl_rate_hz=float(cons.get("min_ctrl_rate_hz", 1.0)),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc), "constraints") from exc
    bounds = d.get("map_bounds")
    if bounds is not None:
        bounds = tuple(float(b) for b in bounds)
        if len(bounds) != 4 or not (bounds[2] > bounds[0] and bounds[3] > bounds[1]):
            raise ScenarioError("expected [xmin, ymin, xmax, ymax]", "map_bounds")
    try:
        speed = float(d["cruise_speed_kmh"])
        timeout = float(d.get("timeout_s", 1800.0))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc), "cruise_speed_kmh") from exc
    return ScenarioSpec(
        task=task,
        map_id=str(d["map_id"]),
        centerline=centerline,
        start=_point(d["start"], "start"),
        goal=_point(d["goal"], "goal"),
        cruise_speed_kmh=speed,
        constraints=constraints,
        timeout_s=timeout,
        map_bounds=bounds,
    )


def load_scenario(text: str) -> ScenarioSpec:
    """Parse YAML text holding either a bare scenario mapping or a ``scenario:`` section."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError(f"parse error: {getattr(exc, 'problem', exc)}", line=line) from exc
    if isinstance(doc, dict) and "scenario" in doc:
        doc = doc["scenario"]
    return scenario_from_dict(doc)


def ideal_trajectory(s: ScenarioSpec) -> Polyline:
    """Centerline section from the projection of ``start`` to that of ``goal``."""
    cl = s.centerline
    s0, _ = cl.project(s.start)
    s1, _ = cl.project(s.goal)
    total = cl.arc_length()
    if s1 <= s0:
        if not cl.closed:
            raise NoPathError(f"goal projects at {s1:.3f} m, before start at {s0:.3f} m on an open centerline")
        s1 += total
    cum = cl.cumulative()
    verts = cl.vertices()
    if cl.closed:
        # unroll one extra lap so wrapped ranges stay monotone
        cum = np.concatenate([cum, cum[1:] + total])
        verts = np.vstack([verts, verts[1:]])
    inner = (cum > s0) & (cum < s1)
    start_xy = [np.interp(s0, cum, verts[:, 0]), np.interp(s0, cum, verts[:, 1])]
    goal_xy = [np.interp(s1, cum, verts[:, 0]), np.interp(s1, cum, verts[:, 1])]
    xy = np.vstack([start_xy, verts[inner], goal_xy])
    keep = np.concatenate([[True], np.any(np.diff(xy, axis=0) != 0.0, axis=1)])
    return Polyline(xy[keep])
