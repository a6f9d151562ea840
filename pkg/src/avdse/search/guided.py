"""Rule-based bottleneck-guided strategy: a deterministic stand-in for an agent's reasoning.

Rule cascade applied to the last evaluated record:

* R1 — the point is infeasible: add compute, alternating a core step-up
  (``core_step`` indices) and a frequency step-up on successive firings.
* R2 — a frequency-bound input mismatch was flagged: move the LiDAR rate
  one step down, which narrows the gap between fast and slow inputs.
* R3 — the point is feasible: step one axis down, choosing the largest cost
  saving among moves the history-based feasibility estimate accepts.
* R3x — no descent move is admissible: propose the cheapest unseen neighbour
  of a known non-dominated point whose estimate would extend the known
  cost/time front.
* R4 — nothing admissible: repropose the cheapest known feasible point and
  terminate.

New points proposed by R1, R2, R3 and R3x are filtered against the history: a
candidate whose estimated navigation time is matched or beaten by a feasible
record at no greater cost is skipped, since it promises nothing new.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from ..design_space import Constraints, DesignPoint, DesignSpace, hardware_cost
from ..memory import MemoryRecord
from ..trace_analysis import IssueType
from .base import History, Proposal, Strategy, cost_key, random_point


@dataclass(frozen=True)
class GuidedParams:
    core_step: int = 4
    freq_step: int = 1
    initial_point: tuple[int, float, int] | None = None  # None: seeded random start

    def __post_init__(self) -> None:
        if self.core_step < 1 or self.freq_step < 1:
            raise ValueError("step sizes must be >= 1")


@dataclass(frozen=True)
class GuidedDecision:
    point: DesignPoint
    rule: str
    rationale: str
    terminate: bool = False


def _shift(space: DesignSpace, p: DesignPoint, axis: int, delta: int) -> DesignPoint | None:
    idx = list(space.index_of(p))
    n = space.shape[axis]
    target = min(max(idx[axis] + delta, 0), n - 1)
    if target == idx[axis]:
        return None
    idx[axis] = target
    return space.point_at(idx)


class _HistoryView:
    """Per-decision index over the history; estimates are memoised per point."""

    def __init__(self, history: History, constraints: Constraints, space: DesignSpace | None = None) -> None:
        self.space = space
        self.constraints = constraints
        self.known = {r.point: r.feasible(constraints) for r in history}
        self.all = [(hardware_cost(r.point), r.metrics.nav_time_s) for r in history]
        self.by_lidar: dict[int, list[tuple[float, float]]] = {}
        for r, cn in zip(history, self.all):
            self.by_lidar.setdefault(r.point.lidar_hz, []).append(cn)
        self.feasible = [cn for r, cn in zip(history, self.all) if r.feasible(constraints)]
        self._known_idx: list[tuple[tuple[int, int, int], bool]] | None = None
        self._est: dict[DesignPoint, float | None] = {}
        self._feas: dict[DesignPoint, bool] = {}
        self._dom: dict[DesignPoint, bool] = {}

    def estimate(self, p: DesignPoint) -> float | None:
        if p not in self._est:
            self._est[p] = self._estimate(p)
        return self._est[p]

    def _estimate(self, p: DesignPoint) -> float | None:
        same = self.by_lidar.get(p.lidar_hz) or self.all
        if not same:
            return None
        c = hardware_cost(p)
        below = [cn for cn in same if cn[0] <= c]
        above = [cn for cn in same if cn[0] >= c]
        lo = max(below, key=lambda cn: (cn[0], -cn[1])) if below else None
        hi = min(above) if above else None
        if lo is not None and hi is not None:
            (c0, t0), (c1, t1) = lo, hi
            if c1 == c0:
                return max(t0, t1)
            w = (1.0 / c - 1.0 / c1) / (1.0 / c0 - 1.0 / c1)
            return w * t0 + (1.0 - w) * t1
        cn, tn = lo if lo is not None else hi
        return tn * cn / c

    def predict_feasible(self, p: DesignPoint) -> bool:
        if p not in self._feas:
            self._feas[p] = self._predict_feasible(p)
        return self._feas[p]

    def _predict_feasible(self, p: DesignPoint) -> bool:
        if p in self.known:
            return self.known[p]
        assert self.space is not None
        if self._known_idx is None:
            self._known_idx = [(self.space.index_of(q), ok) for q, ok in self.known.items()]
        ci, fi, li = self.space.index_of(p)
        for (qc, qf, ql), ok in self._known_idx:
            if ql != li:
                continue
            if not ok and ci <= qc and fi <= qf:
                return False
            if ok and ci >= qc and fi >= qf:
                return True
        est = self.estimate(p)
        return est is not None and est <= self.constraints.max_nav_time_s

    def dominated(self, q: DesignPoint) -> bool:
        if q not in self._dom:
            self._dom[q] = self._dominated(q)
        return self._dom[q]

    def _dominated(self, q: DesignPoint) -> bool:
        if not self.feasible or q.lidar_hz not in self.by_lidar:
            return False  # an estimate borrowed from another LiDAR rate is too weak to rule a point out
        est = self.estimate(q)
        if est is None:
            return False
        # a tie with a known record promises nothing new, so weak dominance suffices
        c = hardware_cost(q)
        return any(fc <= c and ft <= est for fc, ft in self.feasible)

    def extends_front(self, q: DesignPoint, est_nav: float) -> bool:
        c = hardware_cost(q)
        return not any(fc <= c and ft <= est_nav and (fc < c or ft < est_nav) for fc, ft in self.feasible)


def estimate_nav_time(p: DesignPoint, history: History) -> float | None:
    """Nearest-neighbour interpolation of navigation time over history in hardware-cost space.

    Neighbours at the same LiDAR rate are preferred.  Between the nearest
    cheaper and dearer neighbours the estimate is linear in 1/cost (time
    scales inversely with compute capacity); with a neighbour on one side
    only, time is scaled by the cost ratio.
    """
    return _HistoryView(history, Constraints()).estimate(p)


def predict_feasible(p: DesignPoint, history: History, space: DesignSpace, constraints: Constraints) -> bool:
    """Feasibility estimate from history.

    Exact for evaluated points; monotone in compute at equal LiDAR rate (more
    cores or frequency never hurt); otherwise the interpolated navigation
    time must meet the time bound.
    """
    return _HistoryView(history, constraints, space).predict_feasible(p)


def predicted_dominated(q: DesignPoint, history: History, constraints: Constraints) -> bool:
    """True when a feasible record is at least as good as ``q`` on cost and estimated navigation time.

    Only history at ``q``'s LiDAR rate can rule a point out.
    """
    return _HistoryView(history, constraints).dominated(q)


def _r1_firings(history: History) -> int:
    return sum(1 for r in history if r.rationale.startswith("[R1]"))


def _metric_key(r: MemoryRecord) -> tuple:
    m = r.metrics
    dev = m.deviation_score if m.deviation_score is not None else float("inf")
    return (m.hw_cost, m.nav_time_s, -m.ctrl_rate_hz, dev, r.point.as_tuple())


def _best_feasible(history: History, constraints: Constraints) -> MemoryRecord | None:
    feas = [r for r in history if r.feasible(constraints)]
    if not feas:
        return None
    # lexicographic minimum over every recorded metric, hence strictly dominated by no feasible record
    return min(feas, key=_metric_key)


def _infeasibility_reason(last: MemoryRecord, constraints: Constraints) -> str:
    m = last.metrics
    if not m.goal_reached:
        return "the goal was not reached"
    if m.ctrl_rate_hz <= constraints.min_ctrl_rate_hz:
        return f"the control rate {m.ctrl_rate_hz:.3f} Hz is at or below {constraints.min_ctrl_rate_hz:g} Hz"
    return f"navigation took {m.nav_time_s:.2f} s, over the {constraints.max_nav_time_s:g} s limit"


def _descent_moves(p: DesignPoint, space: DesignSpace, params: GuidedParams) -> list[DesignPoint]:
    """Single-axis down-steps plus rebalancing moves (another frequency, fewer cores) that cut cost."""
    moves = [q for q in (_shift(space, p, 0, -1), _shift(space, p, 1, -params.freq_step)) if q is not None]
    ci, fi, li = space.index_of(p)
    budget = hardware_cost(p)
    for fj in range(space.shape[1]):
        if fj == fi:
            continue
        row = (space.point_at((cj, fj, li)) for cj in range(space.shape[0]))
        moves.extend(q for q in row if hardware_cost(q) < budget)
    return list(dict.fromkeys(moves))


def _neighbours(p: DesignPoint, space: DesignSpace) -> list[DesignPoint]:
    out = [_shift(space, p, axis, d) for axis in range(3) for d in (-1, 1)]
    return [q for q in out if q is not None]


def _known_front(records: list[MemoryRecord]) -> list[MemoryRecord]:
    return [
        r
        for r in records
        if not any(
            o.metrics.hw_cost <= r.metrics.hw_cost
            and o.metrics.nav_time_s <= r.metrics.nav_time_s
            and (o.metrics.hw_cost < r.metrics.hw_cost or o.metrics.nav_time_s < r.metrics.nav_time_s)
            for o in records
        )
    ]


def guided_rules(
    last: MemoryRecord,
    history: History,
    space: DesignSpace,
    constraints: Constraints = Constraints(),
    params: GuidedParams = GuidedParams(),
) -> GuidedDecision:
    seen = {r.point for r in history}
    view = _HistoryView(history, constraints, space)
    flags = set(last.bottleneck_flags)
    p = last.point

    if not last.feasible(constraints):
        reason = _infeasibility_reason(last, constraints)
        if IssueType.CPU_BOUND.value in flags:
            reason += "; subscriber callbacks are cpu_bound"
        cores_up = _shift(space, p, 0, params.core_step)
        freq_up = _shift(space, p, 1, params.freq_step)
        both = _shift(space, cores_up, 1, params.freq_step) if cores_up else None
        order = [cores_up, freq_up] if _r1_firings(history) % 2 == 0 else [freq_up, cores_up]
        order += [both] + [_shift(space, p, 0, k) for k in range(1, params.core_step)]
        for q in order:
            if q is None or q in seen or view.dominated(q):
                continue
            what = "cores" if q.cores != p.cores else "frequency"
            if q.cores != p.cores and q.core_frequency_ghz != p.core_frequency_ghz:
                what = "cores and frequency"
            return GuidedDecision(q, "R1", f"[R1] {reason}; increase {what}: {p} -> {q}")

    elif IssueType.FREQUENCY_BOUND.value in flags:
        q = _shift(space, p, 2, -1)
        if q is not None and q not in seen and not view.dominated(q):
            return GuidedDecision(
                q, "R2", f"[R2] frequency_bound input mismatch; lower the LiDAR rate to narrow it: {p} -> {q}"
            )

    feasible = [r for r in history if r.feasible(constraints)]
    if feasible:
        # R3: cost descent from the last point first, then from other feasible points by ascending cost
        sources = [last] if last.feasible(constraints) else []
        sources += sorted((r for r in feasible if r.point != p), key=lambda r: cost_key(r.point))
        for src in sources:
            cands = [
                q
                for q in _descent_moves(src.point, space, params)
                if q not in seen and view.predict_feasible(q) and not view.dominated(q)
            ]
            if cands:
                q = min(cands, key=lambda c: (-(hardware_cost(src.point) - hardware_cost(c)),) + cost_key(c))
                return GuidedDecision(
                    q,
                    "R3",
                    f"[R3] {src.point} is feasible; move to save {hardware_cost(src.point) - hardware_cost(q):g} "
                    f"cost units while the estimate stays feasible: {src.point} -> {q}",
                )
        # front extension: cheapest neighbour of a known non-dominated point predicted to extend the front
        cands = []
        for src in _known_front(feasible):
            for q in _neighbours(src.point, space):
                if q in seen:
                    continue
                est = view.estimate(q)
                if (
                    est is not None
                    and est <= constraints.max_nav_time_s
                    and view.extends_front(q, est)
                    and not view.dominated(q)
                ):
                    cands.append(q)
        if cands:
            q = min(cands, key=cost_key)
            return GuidedDecision(
                q, "R3x", f"[R3x] cost descent exhausted; {q} is predicted to extend the known cost/time front"
            )

    best = _best_feasible(history, constraints)
    target = best.point if best is not None else p
    return GuidedDecision(target, "R4", f"[R4] no admissible move; best known feasible point is {target}", terminate=True)


class GuidedStrategy(Strategy):
    name = "guided"

    def __init__(self, params: GuidedParams | None = None, constraints: Constraints | None = None):
        super().__init__()
        self.params = params or GuidedParams()
        self.constraints = constraints or Constraints()

    def propose(self, history: History, last_report: Any, space: DesignSpace, rng_seed: int) -> Proposal:
        if not history:
            if self.params.initial_point is not None:
                p = DesignPoint(*self.params.initial_point)
                space.index_of(p)
            else:
                p = random_point(space, self.rng(rng_seed))
            return Proposal(p, f"[init] starting point {p}")
        d = guided_rules(history[-1], history, space, self.constraints, self.params)
        return Proposal(d.point, d.rationale, d.terminate)
