"""Round-robin exploration loop: propose -> plan -> execute -> decipher -> record.

Run directory layout::

    config.yaml          effective configuration (after overrides)
    memory.jsonl         long-term memory, one record per line, append-only
    reports/iter_N.json  combined report of iteration N
    result.json          exploration summary
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .config import ExplorationConfig, dump_config
from .deciphering import decipher
from .design_space import DesignPoint, DesignSpace, Metrics, hardware_cost, is_feasible, validate
from .memory import MemoryRecord, MemoryStore, select_references
from .pareto_eval import ObjectivePoint, front_hits, pareto_front
from .scenario import Polyline, ScenarioSpec, ideal_trajectory
from .search import ExhaustedSpaceError, Proposal, Strategy, make_strategy
from .trace_analysis import PerformanceReport
from .trajectory_analysis import TrajectoryVerdict
from .vehicle_model import DEFAULT_PARAMS, NODE_INPUTS, ModelParams, SimulationOutput, simulate

__all__ = [
    "CombinedReport",
    "CommandPlan",
    "ExecutorError",
    "ExplorationResult",
    "ExternalExecutor",
    "MemoryRecord",
    "PlanStep",
    "SyntheticExecutor",
    "build_command_plan",
    "combined_report",
    "run_exploration",
    "select_references",
]

log = logging.getLogger(__name__)

HARDWARE_OPS = ("set_cores", "set_frequency", "set_lidar_rate")
STEP_OPS = HARDWARE_OPS + ("start_profiling", "launch_task", "stop_profiling", "collect_outputs")
TERMINATION_REASONS = ("budget", "strategy", "exhausted", "aborted")
WALL_CLOCK_FIELD = "wall_clock_s"


# ---------------------------------------------------------------- command plans


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class PlanStep:
    op: str
    arg: str = ""

    def __post_init__(self) -> None:
        if self.op not in STEP_OPS:
            raise PlanError(f"unknown plan step {self.op!r}")
        if any(c in self.arg for c in "\r\n"):
            raise PlanError("step arguments must be single-line")

    def render(self) -> str:
        return f"{self.op} {self.arg}".rstrip()


@dataclass(frozen=True)
class CommandPlan:
    steps: tuple[PlanStep, ...]

    def __post_init__(self) -> None:
        ops = [s.op for s in self.steps]
        if ops.count("launch_task") != 1:
            raise PlanError("a plan launches exactly one task")
        launch = ops.index("launch_task")
        if any(op in HARDWARE_OPS for op in ops[launch:]):
            raise PlanError("hardware settings must precede launch_task")
        if "start_profiling" not in ops[:launch]:
            raise PlanError("start_profiling must precede launch_task")
        if "stop_profiling" not in ops[launch + 1 :]:
            raise PlanError("stop_profiling must follow launch_task")

    def serialize(self) -> str:
        return "\n".join(s.render() for s in self.steps) + "\n"

    @classmethod
    def parse(cls, text: str) -> "CommandPlan":
        steps = []
        for line in text.splitlines():
            if not line.strip():
                continue
            op, _, arg = line.strip().partition(" ")
            steps.append(PlanStep(op, arg.strip()))
        return cls(tuple(steps))

    def arg(self, op: str) -> str:
        for s in self.steps:
            if s.op == op:
                return s.arg
        raise PlanError(f"plan has no {op} step")

    def design_point(self) -> DesignPoint:
        return DesignPoint(int(self.arg("set_cores")), float(self.arg("set_frequency")), int(self.arg("set_lidar_rate")))


def build_command_plan(p: DesignPoint, s: ScenarioSpec, seed: int = 0) -> CommandPlan:
    """Hardware settings first, then profiling around the launched task."""
    return CommandPlan(
        (
            PlanStep("set_cores", str(p.cores)),
            PlanStep("set_frequency", f"{p.core_frequency_ghz:g}"),
            PlanStep("set_lidar_rate", str(p.lidar_hz)),
            PlanStep("start_profiling"),
            PlanStep("launch_task", f"task={s.task.value} map={s.map_id} seed={seed}"),
            PlanStep("stop_profiling"),
            PlanStep("collect_outputs"),
        )
    )


# ---------------------------------------------------------------- executors


class ExecutorError(RuntimeError):
    pass


class Executor(ABC):
    @abstractmethod
    def run(self, plan: CommandPlan) -> SimulationOutput: ...


class SyntheticExecutor(Executor):
    """Runs plans against the analytic vehicle model."""

    def __init__(self, scenario: ScenarioSpec, params: ModelParams = DEFAULT_PARAMS) -> None:
        self.scenario = scenario
        self.params = params
        self.ideal: Polyline = ideal_trajectory(scenario)

    def run(self, plan: CommandPlan) -> SimulationOutput:
        fields = dict(kv.split("=", 1) for kv in plan.arg("launch_task").split())
        if fields.get("task") != self.scenario.task.value or fields.get("map") != self.scenario.map_id:
            raise ExecutorError(f"plan targets {fields}, executor holds {self.scenario.task.value}/{self.scenario.map_id}")
        return simulate(plan.design_point(), self.scenario, int(fields.get("seed", 0)), self.params, ideal=self.ideal)


class ExternalExecutor(Executor):
    """Boundary for a real simulator/driving-stack/profiler toolchain driven by command plans."""

    def __init__(self, command: Sequence[str] = ()) -> None:
        self.command = tuple(command)

    def run(self, plan: CommandPlan) -> SimulationOutput:
        raise NotImplementedError("external co-simulation is not available; use SyntheticExecutor")


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class CombinedReport:
    text: str
    structured: dict


def combined_report(perf: PerformanceReport, verdict: TrajectoryVerdict) -> CombinedReport:
    """Merge the trace and trajectory analyses: metrics sentence, findings, JSON block."""
    if perf.nav_time_s is not None and verdict.completed:
        metrics_sentence = (
            f"The navigation time is {perf.nav_time_s:.2f} seconds, and the control command issue rate is "
            f"{perf.ctrl_rate_hz:.3f} Hz."
        )
    else:
        metrics_sentence = (
            f"Navigation did not complete within the timeout; the control command issue rate is "
            f"{perf.ctrl_rate_hz:.3f} Hz."
        )
    structured = {
        "performance": perf.to_dict(),
        "trajectory": verdict.to_dict(),
        "bottleneck_flags": perf.flag_names(),
    }
    findings = [verdict.narrative]
    for issue in perf.detected_issues:
        d = issue.to_dict()
        detail = ", ".join(f"{k}={v}" for k, v in d.items() if k not in ("type", "node"))
        findings.append(f"{d['type']} at {d['node']}: {detail}")
    text = "\n".join(
        [
            metrics_sentence,
            "",
            "Findings:",
            *(f"- {f}" for f in findings),
            "",
            "```json",
            json.dumps(structured, indent=2, sort_keys=True),
            "```",
        ]
    )
    return CombinedReport(text, structured)


# ---------------------------------------------------------------- result


@dataclass
class ExplorationResult:
    records: list[MemoryRecord]
    feasible: list[MemoryRecord]
    pareto_found: list[MemoryRecord]
    best: MemoryRecord | None
    iterations_used: int
    terminated_by: str
    error: str | None = None
    wall_clock_s: float = 0.0
    strategy: str = ""
    seed: int = 0
    budget: int = 0

    @property
    def aborted(self) -> bool:
        return self.terminated_by == "aborted"

    def hits(self, truth: Sequence[ObjectivePoint]) -> int:
        return front_hits([r.point for r in self.records], truth)

    def to_dict(self, truth: Sequence[ObjectivePoint] | None = None) -> dict:
        d = {
            "strategy": self.strategy,
            "seed": self.seed,
            "budget": self.budget,
            "iterations_used": self.iterations_used,
            "records": len(self.records),
            "terminated_by": self.terminated_by,
            "error": self.error,
            "feasible_iterations": [r.iteration for r in self.feasible],
            "pareto_found": [r.to_dict() for r in self.pareto_found],
            "best": self.best.to_dict() if self.best is not None else None,
            WALL_CLOCK_FIELD: self.wall_clock_s,
        }
        if truth is not None:
            d["front_hits"] = self.hits(truth)
            d["truth_front_size"] = len(truth)
        return d


def best_record(feasible: Sequence[MemoryRecord]) -> MemoryRecord | None:
    """Cheapest feasible record; ties go to the shorter navigation time, then the earlier iteration."""
    if not feasible:
        return None
    return min(feasible, key=lambda r: (r.metrics.hw_cost, r.metrics.nav_time_s, r.iteration))


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fp:
            fp.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, obj: Any) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- loop


@dataclass
class _Evaluation:
    metrics: Metrics
    flags: frozenset[str]
    verdict: dict
    report: CombinedReport


def run_exploration(
    config: ExplorationConfig,
    *,
    strategy: Strategy | None = None,
    executor: Executor | None = None,
    backend: Callable[[str], str] | None = None,
    out_dir: str | os.PathLike | None = None,
    write: bool = True,
    truth: Sequence[ObjectivePoint] | None = None,
    call_log: list[tuple[int, str]] | None = None,
) -> ExplorationResult:
    """Run one exploration; deterministic given (config, seed, scripted backends).

    At most ``config.budget`` simulations are executed.  Re-proposed points
    (LLM strategy only) are served from the cache without consuming budget;
    the loop stops after ``2 * budget`` proposals regardless.
    """
    t0 = time.perf_counter()
    s, space, seed, budget = config.scenario, config.space, config.seed, config.budget
    constraints = s.constraints
    if strategy is None:
        if config.strategy == "llm" and backend is None:
            from .search.llm import backend_from_config

            backend = backend_from_config(config.llm)
        strategy = make_strategy(
            config.strategy, config.strategy_params, constraints=constraints, timeout_s=s.timeout_s, task=s, backend=backend
        )
    executor = executor or SyntheticExecutor(s)
    out = Path(out_dir if out_dir is not None else config.output_dir) if write else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _atomic_write(out / "config.yaml", dump_config(config))
    store = MemoryStore(out / "memory.jsonl" if out is not None else None)
    cache: dict[DesignPoint, _Evaluation] = {}
    ideal = getattr(executor, "ideal", None)

    def note(it: int, what: str) -> None:
        if call_log is not None:
            call_log.append((it, what))

    evaluations, proposals = 0, 0
    terminated_by, error = "budget", None
    last_report: CombinedReport | None = None
    while True:
        if evaluations >= budget or proposals >= 2 * budget:
            terminated_by = "budget"
            break
        it = len(store) + 1
        proposals += 1
        note(it, "propose")
        try:
            proposal: Proposal = strategy.propose(store.records, last_report, space, seed)
        except ExhaustedSpaceError:
            terminated_by = "exhausted"
            break
        if proposal.terminate:
            terminated_by = "strategy"
            break
        p = proposal.point
        v = validate(p, space)
        if not v.ok:
            raise ValueError(f"strategy {strategy.name} proposed an invalid point: {v.reason}")
        note(it, "plan")
        plan = build_command_plan(p, s, seed)
        cached = p in cache
        if cached and not strategy.allows_reevaluation:
            raise RuntimeError(f"strategy {strategy.name} re-proposed evaluated point {p}")
        note(it, "execute")
        if not cached:
            try:
                output = executor.run(plan)
            except Exception as exc:  # executor failures abort the run with partial results
                log.error("executor failed at iteration %d: %s", it, exc)
                terminated_by, error = "aborted", f"{type(exc).__name__}: {exc}"
                break
            evaluations += 1
            note(it, "decipher")
            d = decipher(p, output, s, NODE_INPUTS, ideal=ideal)
            cache[p] = _Evaluation(
                d.metrics, frozenset(d.report.flag_names()), d.verdict.to_dict(), combined_report(d.report, d.verdict)
            )
        else:
            note(it, "decipher")
        ev = cache[p]
        note(it, "record")
        rec = MemoryRecord(it, p, ev.metrics, ev.flags, ev.verdict, proposal.rationale, cached=cached)
        store.append(rec)
        if out is not None:
            report = dict(ev.report.structured, iteration=it, text=ev.report.text, plan=plan.serialize().splitlines())
            write_json(out / "reports" / f"iter_{it}.json", report)
        last_report = ev.report
        note(it, "check")

    records = list(store.records)
    unique: dict[DesignPoint, MemoryRecord] = {}
    for r in records:
        unique.setdefault(r.point, r)
    feasible = [r for r in unique.values() if is_feasible(r.metrics, constraints)]
    front = pareto_front([ObjectivePoint.from_metrics(r.point, r.metrics) for r in feasible])
    front_pts = {f.source for f in front}
    result = ExplorationResult(
        records=records,
        feasible=feasible,
        pareto_found=[r for r in feasible if r.point in front_pts],
        best=best_record(feasible),
        iterations_used=evaluations,
        terminated_by=terminated_by,
        error=error,
        wall_clock_s=time.perf_counter() - t0,
        strategy=strategy.name,
        seed=seed,
        budget=budget,
    )
    if out is not None:
        write_json(out / "result.json", result.to_dict(truth))
    return result
