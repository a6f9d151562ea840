"""Regenerate the bundled trace fixtures under src/avdse/data/traces/.

frequency_mismatch.jsonl  planner inputs published at 0.316 Hz and 135.008 Hz
clean.jsonl               a balanced three-stage chain at 10 Hz
topology.yaml             node -> input topics for both fixtures
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import yaml

from avdse.trace_analysis import EventKind, TraceEvent, write_trace

OUT = Path(__file__).resolve().parents[1] / "src" / "avdse" / "data" / "traces"

PLANNER = "behavior_velocity_planner"
SLOW, FAST = "/perception/objects", "/localization/pose"


def periodic(rate: Fraction, count: int, offset_ns: int = 0) -> list[int]:
    """``count`` timestamps whose (count-1)/span equals ``rate`` exactly."""
    period = Fraction(10**9) / rate
    return [offset_ns + round(k * period) for k in range(count)]


def frequency_mismatch() -> list[TraceEvent]:
    ev: list[TraceEvent] = []
    # 0.316 Hz = 79 intervals / 250 s; 135.008 Hz = 4219 intervals / 31.25 s
    for t in periodic(Fraction(316, 1000), 80):
        ev.append(TraceEvent(t, EventKind.PUBLISH, "multi_object_tracker", 120, SLOW))
        ev.append(TraceEvent(t + 1_000, EventKind.CALLBACK_START, PLANNER, 130, SLOW))
        ev.append(TraceEvent(t + 41_000, EventKind.CALLBACK_END, PLANNER, 130, SLOW))
    for t in periodic(Fraction(135008, 1000), 4220, offset_ns=2_000_000):
        ev.append(TraceEvent(t, EventKind.PUBLISH, "ekf_localizer", 110, FAST))
    return sorted(ev, key=lambda e: e.t_ns)


def clean() -> list[TraceEvent]:
    ev: list[TraceEvent] = []
    chain = [("pointcloud_preprocessor", "/sensing/lidar/points"), ("ekf_localizer", "/localization/pose"), ("trajectory_follower", "/control/command/control_cmd")]
    for k, t in enumerate(periodic(Fraction(10), 51)):
        for i, (node, topic) in enumerate(chain):
            tid = 100 + 10 * i
            start = t + i * 5_000_000
            if i:
                ev.append(TraceEvent(start, EventKind.CALLBACK_START, node, tid, chain[i - 1][1]))
                ev.append(TraceEvent(start + 4_000_000, EventKind.CALLBACK_END, node, tid, chain[i - 1][1]))
            ev.append(TraceEvent(start + 4_000_000, EventKind.PUBLISH, node, tid, topic))
    ev.append(TraceEvent(0, EventKind.NAV_START, "simulator_bridge", 1))
    ev.append(TraceEvent(5_020_000_000, EventKind.NAV_GOAL_REACHED, "simulator_bridge", 1))
    return sorted(ev, key=lambda e: e.t_ns)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for name, events in (("frequency_mismatch.jsonl", frequency_mismatch()), ("clean.jsonl", clean())):
        with open(OUT / name, "w", encoding="utf-8") as fp:
            write_trace(events, fp)
    topology = {
        "node_inputs": {
            PLANNER: [SLOW, FAST],
            "ekf_localizer": ["/sensing/lidar/points"],
            "trajectory_follower": ["/localization/pose"],
        }
    }
    (OUT / "topology.yaml").write_text(
        "# node -> subscribed input topics, used for input-rate mismatch detection\n" + yaml.safe_dump(topology, sort_keys=True),
        encoding="utf-8",
    )


if __name__ == "__main__":
    main()
