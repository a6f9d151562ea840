"""Synthetic pipeline surrogate for the driving co-simulation.

A design point is mapped to per-stage processing times with Amdahl's law,
stage output rates follow the slowest upstream stage, the control rate sets
the vehicle's effective speed and lateral jitter, and a publish/callback
trace is emitted at the model rates.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from .design_space import DesignPoint, DesignSpace, Metrics, enumerate_space
from .rng import substream
from .scenario import SNAP_DISTANCE_M, Polyline, ScenarioSpec, ideal_trajectory
from .trace_analysis import KIND_CODES, EventKind, EventTable

STAGE_NAMES = ("sensing", "localization", "perception", "planning", "control")
TOPICS = (
    "/sensing/lidar/points",
    "/localization/pose",
    "/perception/objects",
    "/planning/trajectory",
    "/control/command/control_cmd",
)
NODES = (
    "pointcloud_preprocessor",
    "ekf_localizer",
    "multi_object_tracker",
    "behavior_velocity_planner",
    "trajectory_follower",
)
NAV_NODE = "simulator_bridge"
# each stage is triggered by its upstream topic; planning and control also cache the pose
TRIGGER_INPUT = {NODES[i]: TOPICS[i - 1] for i in range(1, 5)}
AUX_INPUTS = {NODES[3]: (TOPICS[1],), NODES[4]: (TOPICS[1],)}
NODE_INPUTS: dict[str, tuple[str, ...]] = {
    node: (TRIGGER_INPUT[node],) + AUX_INPUTS.get(node, ()) for node in NODES[1:]
}

AUX_CALLBACK_NS = 50_000
DITHER_NS = 1_000_000


@dataclass(frozen=True)
class PipelineStage:
    name: str
    workload_gcycles: float
    parallel_fraction: float

    def __post_init__(self) -> None:
        if not self.workload_gcycles > 0:
            raise ValueError("workload must be positive")
        if not 0.0 <= self.parallel_fraction <= 1.0:
            raise ValueError("parallel_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class ModelParams:
    stages: tuple[PipelineStage, ...]
    ctrl_ref_hz: float = 8.0
    jitter_a0_m_hz: float = 0.5
    jitter_max_m: float = 2.0
    jitter_wavelength_m: float = 30.0
    stability_cutoff_hz: float = 0.5
    taper_m: float = 10.0
    sample_spacing_m: float = 1.0
    goal_tolerance_m: float = 2.0

    def __post_init__(self) -> None:
        if tuple(s.name for s in self.stages) != STAGE_NAMES:
            raise ValueError(f"stages must be ordered {STAGE_NAMES}")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        stages = tuple(
            PipelineStage(name, float(d["stages"][name]["workload_gcycles"]), float(d["stages"][name]["parallel_fraction"]))
            for name in STAGE_NAMES
        )
        rest = {k: float(v) for k, v in d.items() if k not in ("stages", "calibration")}
        return cls(stages=stages, **rest)

    def to_dict(self) -> dict:
        d = {
            "stages": {
                s.name: {"workload_gcycles": s.workload_gcycles, "parallel_fraction": s.parallel_fraction} for s in self.stages
            }
        }
        for k in ("ctrl_ref_hz", "jitter_a0_m_hz", "jitter_max_m", "jitter_wavelength_m", "stability_cutoff_hz", "taper_m", "sample_spacing_m", "goal_tolerance_m"):
            d[k] = getattr(self, k)
        return d


def load_default_params() -> ModelParams:
    text = resources.files("avdse").joinpath("calibration.json").read_text(encoding="utf-8")
    return ModelParams.from_dict(json.loads(text))


DEFAULT_PARAMS = load_default_params()


def amdahl_speedup(cores: float, parallel_fraction: float) -> float:
    return 1.0 / ((1.0 - parallel_fraction) + parallel_fraction / cores)


@dataclass(frozen=True)
class StageRate:
    name: str
    processing_time_s: float
    output_rate_hz: float


def stage_rates(p: DesignPoint, params: ModelParams = DEFAULT_PARAMS) -> list[StageRate]:
    out = []
    upstream = float(p.lidar_hz)
    for st in params.stages:
        pt = st.workload_gcycles / (amdahl_speedup(p.cores, st.parallel_fraction) * p.core_frequency_ghz)
        upstream = min(upstream, 1.0 / pt)
        out.append(StageRate(st.name, pt, upstream))
    return out


def control_rate(p: DesignPoint, params: ModelParams = DEFAULT_PARAMS) -> float:
    return stage_rates(p, params)[-1].output_rate_hz


@dataclass(frozen=True)
class SimulationOutput:
    trace: EventTable
    actual_trajectory: Polyline
    completed: bool
    wall_time_s: float
    ctrl_rate_hz: float = 0.0


@dataclass
class _TraceBuilder:
    t: list = field(default_factory=list)
    kind: list = field(default_factory=list)
    node: list = field(default_factory=list)
    tid: list = field(default_factory=list)
    topic: list = field(default_factory=list)

    def add(self, t_ns: np.ndarray, kind: EventKind, node: int, tid: int, topic: int) -> None:
        n = len(t_ns)
        self.t.append(t_ns)
        self.kind.append(np.full(n, KIND_CODES[kind], np.int8))
        self.node.append(np.full(n, node, np.int32))
        self.tid.append(np.full(n, tid, np.int64))
        self.topic.append(np.full(n, topic, np.int32))

    def build(self, node_names, topic_names) -> EventTable:
        return EventTable(
            np.concatenate(self.t),
            np.concatenate(self.kind),
            np.concatenate(self.node),
            np.concatenate(self.tid),
            np.concatenate(self.topic),
            node_names,
            topic_names,
        )


def _frame_times(rate_hz: float, end_ns: int, rng: np.random.Generator) -> np.ndarray:
    """Frame instants on an integer-nanosecond grid; interior frames are dithered.

    The first and last frames stay on the grid so the (count - 1) / span
    rate estimate recovers the grid rate exactly.
    """
    period_ns = int(round(1e9 / rate_hz))
    t = np.arange(end_ns // period_ns + 1, dtype=np.int64) * period_ns
    if len(t) > 2:
        t[1:-1] += rng.integers(-DITHER_NS, DITHER_NS + 1, size=len(t) - 2)
    return t


def _emit_trace(rates: Sequence[StageRate], end_ns: int, nav_ns: int | None, rng: np.random.Generator) -> EventTable:
    node_names = NODES + (NAV_NODE,)
    nav_code = len(NODES)
    b = _TraceBuilder()
    pub_times: list[np.ndarray] = []
    for i, sr in enumerate(rates):
        starts = _frame_times(sr.output_rate_hz, end_ns, rng)
        tid = 100 + 10 * i
        if i == 0:
            ends = starts
        else:
            ends = starts + int(round(sr.processing_time_s * 1e9))
            b.add(starts, EventKind.CALLBACK_START, i, tid, i - 1)
            b.add(ends, EventKind.CALLBACK_END, i, tid, i - 1)
        b.add(ends, EventKind.PUBLISH, i, tid, i)
        pub_times.append(ends)
    for node, topics in AUX_INPUTS.items():
        i = NODES.index(node)
        for topic in topics:
            j = TOPICS.index(topic)
            st = pub_times[j] + 1_000
            b.add(st, EventKind.CALLBACK_START, i, 100 + 10 * i + 1, j)
            b.add(st + AUX_CALLBACK_NS, EventKind.CALLBACK_END, i, 100 + 10 * i + 1, j)
    b.add(np.array([0], np.int64), EventKind.NAV_START, nav_code, 1, -1)
    if nav_ns is not None:
        b.add(np.array([nav_ns], np.int64), EventKind.NAV_GOAL_REACHED, nav_code, 1, -1)
    return b.build(node_names, TOPICS)


def _unit_normals(xy: np.ndarray) -> np.ndarray:
    d = np.diff(xy, axis=0)
    d /= np.hypot(d[:, 0], d[:, 1])[:, None]
    return np.stack([-d[:, 1], d[:, 0]], axis=1)


def _actual_path(
    ideal: Polyline, s: ScenarioSpec, covered_m: float, amplitude_m: float, phase: float, params: ModelParams
) -> Polyline:
    total = ideal.arc_length()
    cum = ideal.cumulative()
    n = max(2, int(math.ceil(covered_m / params.sample_spacing_m)) + 1)
    arc = np.linspace(0.0, covered_m, n)
    base = ideal.point_at(arc)
    seg = np.clip(np.searchsorted(cum, arc, side="right") - 1, 0, len(cum) - 2)
    normals = _unit_normals(ideal.xy)[seg]
    envelope = np.clip(np.minimum(arc, total - arc) / params.taper_m, 0.0, 1.0)
    offset = amplitude_m * envelope * np.sin(2 * np.pi * arc / params.jitter_wavelength_m + phase)
    lead_in = np.clip(1.0 - arc / params.taper_m, 0.0, 1.0)
    start_gap = np.array([s.start.x, s.start.y]) - base[0]
    xy = base + normals * offset[:, None] + lead_in[:, None] * start_gap
    xy[0] = (s.start.x, s.start.y)
    keep = np.concatenate([[True], np.any(np.diff(xy, axis=0) != 0.0, axis=1)])
    return Polyline(xy[keep])


def simulate(
    p: DesignPoint,
    s: ScenarioSpec,
    seed: int,
    params: ModelParams = DEFAULT_PARAMS,
    ideal: Polyline | None = None,
) -> SimulationOutput:
    """Run the surrogate for one design point; deterministic in (p, s, seed)."""
    if ideal is None:
        ideal = ideal_trajectory(s)
    rates = stage_rates(p, params)
    ctrl = rates[-1].output_rate_hz
    length = ideal.arc_length()
    v_eff = s.cruise_speed_mps * min(1.0, ctrl / params.ctrl_ref_hz)
    t_nav = length / v_eff
    completed = ctrl >= params.stability_cutoff_hz and t_nav <= s.timeout_s
    if completed:
        wall, covered = t_nav, length
    else:
        # a timed-out vehicle stops well short of the goal tolerance
        wall = s.timeout_s
        margin = params.goal_tolerance_m + params.jitter_max_m + SNAP_DISTANCE_M + 1.0
        covered = max(params.sample_spacing_m, min(v_eff * s.timeout_s, length - margin))
    rng = substream(seed, "jitter", p.cores, int(round(p.core_frequency_ghz * 1000)), p.lidar_hz)
    phase = float(rng.uniform(0.0, 2 * np.pi))
    amplitude = min(params.jitter_max_m, params.jitter_a0_m_hz / ctrl)
    actual = _actual_path(ideal, s, covered, amplitude, phase, params)
    end_ns = int(round(wall * 1e9))
    trace = _emit_trace(rates, end_ns, end_ns if completed else None, rng)
    return SimulationOutput(trace=trace, actual_trajectory=actual, completed=completed, wall_time_s=wall, ctrl_rate_hz=ctrl)


def ground_truth(
    space: DesignSpace,
    s: ScenarioSpec,
    seed: int,
    params: ModelParams = DEFAULT_PARAMS,
    workers: int = 1,
) -> list[tuple[DesignPoint, Metrics]]:
    """Evaluate every enumerated point (simulate then decipher), in enumeration order."""
    from .deciphering import decipher

    ideal = ideal_trajectory(s)
    points = enumerate_space(space)

    def run(p: DesignPoint) -> tuple[DesignPoint, Metrics]:
        out = simulate(p, s, seed, params, ideal=ideal)
        return p, decipher(p, out, s, NODE_INPUTS, ideal=ideal).metrics

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(run, points))
    return [run(p) for p in points]
