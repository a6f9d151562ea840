"""Deterministic trace deciphering: topic rates, callback latencies and bottleneck detection.

Trace files hold one flat JSON object per line with keys, in order,
``t_ns``, ``kind``, ``node``, ``tid`` and ``topic`` (omitted for navigation
events)::

    {"t_ns": 0, "kind": "nav_start", "node": "simulator_bridge", "tid": 1}
    {"t_ns": 71428571, "kind": "publish", "node": "pointcloud_preprocessor", "tid": 10, "topic": "/sensing/lidar/points"}
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import kernels

logger = logging.getLogger(__name__)

CTRL_TOPIC = "/control/command/control_cmd"
MIN_RATE_WINDOW_S = 0.5
FREQUENCY_BOUND_RATIO = 10.0

# (upper bound on publisher rate in Hz, minimum subscriber/publisher ratio)
CPU_BOUND_THRESHOLDS: tuple[tuple[float, float], ...] = ((1.0, 0.7), (10.0, 0.8), (float("inf"), 0.9))


class EventKind(str, enum.Enum):
    PUBLISH = "publish"
    CALLBACK_START = "subscribe_callback_start"
    CALLBACK_END = "subscribe_callback_end"
    NAV_START = "nav_start"
    NAV_GOAL_REACHED = "nav_goal_reached"


KIND_CODES: dict[EventKind, int] = {k: i for i, k in enumerate(EventKind)}
_KINDS = list(EventKind)
_NAV_KINDS = (EventKind.NAV_START, EventKind.NAV_GOAL_REACHED)


class IssueType(str, enum.Enum):
    CPU_BOUND = "cpu_bound"
    FREQUENCY_BOUND = "frequency_bound"


class TraceParseError(ValueError):
    def __init__(self, line_no: int, message: str) -> None:
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class NavAmbiguityError(ValueError):
    pass


@dataclass(frozen=True)
class TraceEvent:
    t_ns: int
    kind: EventKind
    node: str
    tid: int
    topic: str | None = None

    def __post_init__(self) -> None:
        if self.t_ns < 0:
            raise ValueError("t_ns must be >= 0")
        if self.kind not in _NAV_KINDS and not self.topic:
            raise ValueError(f"{self.kind.value} event requires a topic")

    def to_json(self) -> str:
        d: dict = {"t_ns": self.t_ns, "kind": self.kind.value, "node": self.node, "tid": self.tid}
        if self.topic is not None:
            d["topic"] = self.topic
        return json.dumps(d, separators=(", ", ": "))


class EventTable:
    """Columnar, time-sorted event store; iterates as :class:`TraceEvent`.

    Node and topic names are interned into small integer codes so the
    analyses can run as array operations. Topic code -1 means "no topic".
    """

    __slots__ = ("t_ns", "kind", "node", "tid", "topic", "node_names", "topic_names")

    def __init__(self, t_ns, kind, node, tid, topic, node_names: Sequence[str], topic_names: Sequence[str], *, presorted=False):
        t_ns = np.asarray(t_ns, dtype=np.int64)
        order = slice(None) if presorted else np.argsort(t_ns, kind="stable")
        self.t_ns = t_ns[order]
        self.kind = np.asarray(kind, dtype=np.int8)[order]
        self.node = np.asarray(node, dtype=np.int32)[order]
        self.tid = np.asarray(tid, dtype=np.int64)[order]
        self.topic = np.asarray(topic, dtype=np.int32)[order]
        self.node_names = tuple(node_names)
        self.topic_names = tuple(topic_names)
        for a in (self.t_ns, self.kind, self.node, self.tid, self.topic):
            a.setflags(write=False)

    @classmethod
    def from_events(cls, events: Iterable[TraceEvent]) -> "EventTable":
        nodes: dict[str, int] = {}
        topics: dict[str, int] = {}
        rows = []
        for e in events:
            n = nodes.setdefault(e.node, len(nodes))
            t = -1 if e.topic is None else topics.setdefault(e.topic, len(topics))
            rows.append((e.t_ns, KIND_CODES[e.kind], n, e.tid, t))
        arr = np.array(rows, dtype=np.int64).reshape(-1, 5)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], list(nodes), list(topics))

    def __len__(self) -> int:
        return len(self.t_ns)

    def __getitem__(self, i: int) -> TraceEvent:
        topic = int(self.topic[i])
        return TraceEvent(
            t_ns=int(self.t_ns[i]),
            kind=_KINDS[int(self.kind[i])],
            node=self.node_names[int(self.node[i])],
            tid=int(self.tid[i]),
            topic=None if topic < 0 else self.topic_names[topic],
        )

    def __iter__(self) -> Iterator[TraceEvent]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventTable):
            return NotImplemented
        return list(self) == list(other)

    def scaled(self, k: int) -> "EventTable":
        """Copy with every timestamp multiplied by the integer ``k``."""
        return EventTable(self.t_ns * k, self.kind, self.node, self.tid, self.topic, self.node_names, self.topic_names, presorted=True)

    def mask(self, kind: EventKind) -> np.ndarray:
        return self.kind == KIND_CODES[kind]


def as_table(events: EventTable | Iterable[TraceEvent]) -> EventTable:
    if isinstance(events, EventTable):
        return events
    return EventTable.from_events(events)


_REQUIRED_KEYS = ("t_ns", "kind", "node", "tid")


def parse_trace(lines: Iterable[str]) -> list[TraceEvent]:
    """Parse JSON-lines trace records; result is stably sorted by timestamp."""
    events = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceParseError(line_no, f"malformed record ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise TraceParseError(line_no, "record is not an object")
        missing = [k for k in _REQUIRED_KEYS if k not in rec]
        if missing:
            raise TraceParseError(line_no, "missing key(s): " + ", ".join(missing))
        try:
            kind = EventKind(rec["kind"])
        except ValueError:
            raise TraceParseError(line_no, f"unknown event kind {rec['kind']!r}") from None
        topic = rec.get("topic")
        if kind not in _NAV_KINDS and not topic:
            raise TraceParseError(line_no, f"{kind.value} record missing topic")
        t_ns, tid = rec["t_ns"], rec["tid"]
        if not isinstance(t_ns, int) or isinstance(t_ns, bool) or t_ns < 0:
            raise TraceParseError(line_no, f"t_ns must be a non-negative integer, got {t_ns!r}")
        if not isinstance(tid, int) or isinstance(tid, bool):
            raise TraceParseError(line_no, f"tid must be an integer, got {tid!r}")
        events.append(TraceEvent(t_ns, kind, str(rec["node"]), tid, None if topic is None else str(topic)))
    events.sort(key=lambda e: e.t_ns)
    return events


def write_trace(events: EventTable | Iterable[TraceEvent], fp: IO[str]) -> None:
    for e in events:
        fp.write(e.to_json())
        fp.write("\n")


def _rate(t_ns: np.ndarray) -> float:
    # (count - 1) / span, zero for degenerate windows
    if len(t_ns) < 2:
        return 0.0
    span_ns = int(t_ns[-1]) - int(t_ns[0])
    if span_ns < MIN_RATE_WINDOW_S * 1e9:
        return 0.0
    # integer true division is correctly rounded, so equal grids give equal rates
    return (len(t_ns) - 1) * 1_000_000_000 / span_ns


def _grouped_rates(t_ns: np.ndarray, group: np.ndarray) -> dict[int, float]:
    out = {}
    if len(t_ns) == 0:
        return out
    order = np.argsort(group, kind="stable")
    g = group[order]
    t = t_ns[order]
    bounds = np.flatnonzero(np.diff(g)) + 1
    for seg_g, seg_t in zip(np.split(g, bounds), np.split(t, bounds)):
        out[int(seg_g[0])] = _rate(seg_t)
    return out


def topic_publish_rates(events) -> dict[str, float]:
    tab = as_table(events)
    m = tab.mask(EventKind.PUBLISH)
    rates = _grouped_rates(tab.t_ns[m], tab.topic[m])
    return {tab.topic_names[k]: rates[k] for k in sorted(rates, key=lambda k: tab.topic_names[k])}


def subscriber_callback_rates(events) -> dict[tuple[str, str], float]:
    """Callback arrival rate per (topic, subscribing node), measured on callback starts."""
    tab = as_table(events)
    m = tab.mask(EventKind.CALLBACK_START)
    key = tab.topic[m].astype(np.int64) * (len(tab.node_names) + 1) + tab.node[m]
    rates = _grouped_rates(tab.t_ns[m], key)
    out = {}
    for k, r in rates.items():
        topic, node = divmod(k, len(tab.node_names) + 1)
        out[(tab.topic_names[topic], tab.node_names[node])] = r
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class CallbackPairs:
    node: np.ndarray  # node code per matched callback
    duration_ns: np.ndarray
    unmatched_starts: int


def match_callbacks(events) -> CallbackPairs:
    """Pair callback starts and ends per (node, tid, topic), oldest open start first."""
    tab = as_table(events)
    sel = np.flatnonzero(tab.mask(EventKind.CALLBACK_START) | tab.mask(EventKind.CALLBACK_END))
    if len(sel) == 0:
        return CallbackPairs(np.zeros(0, np.int32), np.zeros(0, np.int64), 0)
    _, tid_code = np.unique(tab.tid[sel], return_inverse=True)
    n_tids = int(tid_code.max()) + 1
    key = (tab.node[sel].astype(np.int64) * n_tids + tid_code.reshape(-1)) * (len(tab.topic_names) + 1) + tab.topic[sel] + 1
    order = np.argsort(key, kind="stable")
    grouped = sel[order]
    s_pos, e_pos, unmatched = kernels.match_fifo(key[order], tab.kind[grouped] == KIND_CODES[EventKind.CALLBACK_START])
    s_idx, e_idx = grouped[s_pos], grouped[e_pos]
    return CallbackPairs(tab.node[s_idx], tab.t_ns[e_idx] - tab.t_ns[s_idx], int(unmatched))


def callback_latencies(events, pairs: CallbackPairs | None = None) -> dict[str, dict[str, float]]:
    tab = as_table(events)
    if pairs is None:
        pairs = match_callbacks(tab)
    if pairs.unmatched_starts:
        logger.warning("%d callback start(s) without a matching end ignored", pairs.unmatched_starts)
    out = {}
    for code in np.unique(pairs.node):
        d = pairs.duration_ns[pairs.node == code] * 1e-9
        out[tab.node_names[int(code)]] = {"avg_s": float(d.mean()), "max_s": float(d.max())}
    return dict(sorted(out.items()))


def extract_ctrl_rate(events, topic: str = CTRL_TOPIC) -> float:
    return topic_publish_rates(events).get(topic, 0.0)


def extract_nav_time(events) -> float | None:
    tab = as_table(events)
    starts = tab.t_ns[tab.mask(EventKind.NAV_START)]
    goals = tab.t_ns[tab.mask(EventKind.NAV_GOAL_REACHED)]
    if len(starts) > 1 or len(goals) > 1:
        raise NavAmbiguityError(f"expected at most one nav_start and one nav_goal_reached, got {len(starts)} and {len(goals)}")
    if len(starts) == 0 or len(goals) == 0:
        return None
    return (int(goals[0]) - int(starts[0])) * 1e-9


def cpu_bound_threshold(publisher_hz: float) -> float:
    for upper, threshold in CPU_BOUND_THRESHOLDS:
        if publisher_hz < upper:
            return threshold
    return CPU_BOUND_THRESHOLDS[-1][1]


@dataclass(frozen=True)
class TopicRate:
    topic: str
    role: str  # publisher/subscriber for cpu_bound, slow/fast for frequency_bound
    hz: float


@dataclass(frozen=True)
class DetectedIssue:
    issue_type: IssueType
    node: str
    topics: tuple[TopicRate, ...]

    def __post_init__(self) -> None:
        roles = tuple(t.role for t in self.topics)
        expected = ("publisher", "subscriber") if self.issue_type is IssueType.CPU_BOUND else ("slow", "fast")
        if roles != expected:
            raise ValueError(f"{self.issue_type.value} issue needs topics with roles {expected}, got {roles}")

    def to_dict(self) -> dict:
        a, b = self.topics
        if self.issue_type is IssueType.CPU_BOUND:
            return {"type": self.issue_type.value, "node": self.node, "topic": a.topic, "publisher_hz": a.hz, "subscriber_hz": b.hz}
        return {
            "type": self.issue_type.value,
            "node": self.node,
            "slow_topic": a.topic,
            "slow_hz": a.hz,
            "fast_topic": b.topic,
            "fast_hz": b.hz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectedIssue":
        t = IssueType(d["type"])
        if t is IssueType.CPU_BOUND:
            topics = (TopicRate(d["topic"], "publisher", d["publisher_hz"]), TopicRate(d["topic"], "subscriber", d["subscriber_hz"]))
        else:
            topics = (TopicRate(d["slow_topic"], "slow", d["slow_hz"]), TopicRate(d["fast_topic"], "fast", d["fast_hz"]))
        return cls(t, d["node"], topics)


def detect_cpu_bound(events) -> list[DetectedIssue]:
    tab = as_table(events)
    pub = topic_publish_rates(tab)
    issues = []
    for (topic, node), s_hz in subscriber_callback_rates(tab).items():
        p_hz = pub.get(topic, 0.0)
        if p_hz <= 0.0:
            continue
        if s_hz / p_hz < cpu_bound_threshold(p_hz):
            issues.append(
                DetectedIssue(IssueType.CPU_BOUND, node, (TopicRate(topic, "publisher", p_hz), TopicRate(topic, "subscriber", s_hz)))
            )
    return issues


def detect_frequency_bound(events, node_inputs: Mapping[str, Sequence[str]]) -> list[DetectedIssue]:
    """Flag nodes whose (observed, non-zero) input topic rates differ by more than 10x."""
    rates = topic_publish_rates(events)
    issues = []
    for node in sorted(node_inputs):
        observed = [(t, rates[t]) for t in node_inputs[node] if rates.get(t, 0.0) > 0.0]
        if len(observed) < 2:
            continue
        slow = min(observed, key=lambda tr: tr[1])
        fast = max(observed, key=lambda tr: tr[1])
        if fast[1] / slow[1] > FREQUENCY_BOUND_RATIO:
            issues.append(
                DetectedIssue(IssueType.FREQUENCY_BOUND, node, (TopicRate(slow[0], "slow", slow[1]), TopicRate(fast[0], "fast", fast[1])))
            )
    return issues


@dataclass(frozen=True)
class PerformanceReport:
    node_callback_latencies: dict[str, dict[str, float]]
    topic_publish_rates: dict[str, float]
    ctrl_rate_hz: float
    nav_time_s: float | None
    detected_issues: tuple[DetectedIssue, ...]
    bottleneck_flags: frozenset[IssueType] = field(default=frozenset())
    unmatched_callbacks: int = 0

    def __post_init__(self) -> None:
        flags = frozenset(i.issue_type for i in self.detected_issues)
        if self.bottleneck_flags and frozenset(self.bottleneck_flags) != flags:
            raise ValueError("bottleneck_flags must match the detected issue types")
        object.__setattr__(self, "bottleneck_flags", flags)

    def flag_names(self) -> list[str]:
        return sorted(f.value for f in self.bottleneck_flags)

    def to_dict(self) -> dict:
        return {
            "node_callback_latencies": {
                n: {"avg_callback_latency_sec": v["avg_s"], "max_callback_latency_sec": v["max_s"]}
                for n, v in self.node_callback_latencies.items()
            },
            "topic_publish_rates": dict(self.topic_publish_rates),
            "ctrl_rate_hz": self.ctrl_rate_hz,
            "nav_time_s": self.nav_time_s,
            "detected_issues": [i.to_dict() for i in self.detected_issues],
            "bottleneck_flags": self.flag_names(),
            "unmatched_callbacks": self.unmatched_callbacks,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PerformanceReport":
        return cls(
            node_callback_latencies={
                n: {"avg_s": v["avg_callback_latency_sec"], "max_s": v["max_callback_latency_sec"]}
                for n, v in d["node_callback_latencies"].items()
            },
            topic_publish_rates=dict(d["topic_publish_rates"]),
            ctrl_rate_hz=d["ctrl_rate_hz"],
            nav_time_s=d["nav_time_s"],
            detected_issues=tuple(DetectedIssue.from_dict(i) for i in d["detected_issues"]),
            unmatched_callbacks=d.get("unmatched_callbacks", 0),
        )


def build_report(events, node_inputs: Mapping[str, Sequence[str]]) -> PerformanceReport:
    tab = as_table(events)
    issues = detect_cpu_bound(tab) + detect_frequency_bound(tab, node_inputs)
    pairs = match_callbacks(tab)
    return PerformanceReport(
        node_callback_latencies=callback_latencies(tab, pairs),
        topic_publish_rates=topic_publish_rates(tab),
        ctrl_rate_hz=extract_ctrl_rate(tab),
        nav_time_s=extract_nav_time(tab),
        detected_issues=tuple(issues),
        unmatched_callbacks=pairs.unmatched_starts,
    )
