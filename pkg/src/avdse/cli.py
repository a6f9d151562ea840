"""Command-line entry point: ``avdse {explore,exhaustive,compare,analyze-trace}``.

Exit status: 0 success, 2 configuration/input error, 3 executor failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import yaml

from .config import ConfigError, ExplorationConfig, load_config
from .orchestrator import _atomic_write, run_exploration, write_json
from .pareto_eval import ObjectivePoint, emit_plot_data, truth_front
from .search import STRATEGY_NAMES
from .search.llm import BackendError
from .trace_analysis import TraceParseError, build_report, parse_trace
from .vehicle_model import ground_truth

EXIT_OK, EXIT_CONFIG, EXIT_EXECUTOR = 0, 2, 3

log = logging.getLogger("avdse")


def _err(msg: str) -> None:
    print(f"avdse: error: {msg}", file=sys.stderr)


def _load(args: argparse.Namespace) -> ExplorationConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(
        strategy=getattr(args, "strategy", None),
        budget=getattr(args, "budget", None),
        seed=getattr(args, "seed", None),
        out=getattr(args, "out", None),
    )


def _prepare_out(path: str | Path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output_dir {out} is not writable: {exc.strerror or exc}") from exc
    return out


def _truth(cfg: ExplorationConfig, workers: int = 1) -> tuple[list, list[ObjectivePoint]]:
    evals = ground_truth(cfg.space, cfg.scenario, cfg.seed, workers=workers)
    return evals, truth_front(evals, cfg.scenario.constraints)


def _front_json(front: Sequence[ObjectivePoint]) -> list[dict]:
    return [
        {"cores": f.source.cores, "freq_ghz": f.source.core_frequency_ghz, "lidar_hz": f.source.lidar_hz,
         "nav_time_s": f.nav_time_s, "hw_cost": f.hw_cost}
        for f in front
    ]


def cmd_explore(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _prepare_out(cfg.output_dir)
    _, front = _truth(cfg)
    result = run_exploration(cfg, out_dir=out, truth=front)
    if result.aborted:
        _err(f"executor failure: {result.error} (partial results in {out})")
        return EXIT_EXECUTOR
    best = result.best
    print(f"strategy={cfg.strategy} seed={cfg.seed} evaluations={result.iterations_used} terminated_by={result.terminated_by}")
    if best is None:
        print("best feasible point: none")
    else:
        m = best.metrics
        print(f"best feasible point: {best.point} nav_time_s={m.nav_time_s:.2f} hw_cost={m.hw_cost:g} ctrl_rate_hz={m.ctrl_rate_hz:.3f}")
    print(f"front hits: {result.hits(front)} of {len(front)}")
    print(f"run directory: {out}")
    return EXIT_OK


def cmd_exhaustive(args: argparse.Namespace) -> int:
    cfg = _load(args)
    out = _prepare_out(cfg.output_dir)
    evals, front = _truth(cfg, workers=args.workers)
    _atomic_write(out / "ground_truth.csv", emit_plot_data(evals, front, None, cfg.scenario.constraints))
    write_json(out / "truth_front.json", {"seed": cfg.seed, "front_size": len(front), "front": _front_json(front)})
    print(f"evaluated {len(evals)} points; truth front has {len(front)} points; written to {out}")
    return EXIT_OK


def _parse_seeds(text: str) -> list[int]:
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        if sep:
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("no seeds given")
    return seeds


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _load(args)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    unknown = [s for s in strategies if s not in STRATEGY_NAMES]
    if unknown or not strategies:
        raise ConfigError(f"unknown strategy name(s): {', '.join(unknown) or '(none)'}")
    try:
        seeds = _parse_seeds(args.seeds)
    except ValueError as exc:
        raise ConfigError(f"bad --seeds value {args.seeds!r}: {exc}") from exc
    out = _prepare_out(cfg.output_dir)
    _, front = _truth(cfg)
    rows = []
    for name in strategies:
        for seed in seeds:
            run_cfg = cfg.with_overrides(strategy=name, seed=seed)
            res = run_exploration(run_cfg, write=False)
            if res.aborted:
                _err(f"executor failure in {name}/seed {seed}: {res.error}")
                return EXIT_EXECUTOR
            best = res.best
            row = {
                "strategy": name,
                "seed": seed,
                "budget": cfg.budget,
                "front_size": len(front),
                "hits": res.hits(front),
                "best_cost": best.metrics.hw_cost if best else None,
                "best_nav_time_s": best.metrics.nav_time_s if best else None,
                "evaluations": res.iterations_used,
            }
            rows.append(row)
    means = {}
    for name in strategies:
        sub = [r for r in rows if r["strategy"] == name]
        means[name] = {"mean_hits": sum(r["hits"] for r in sub) / len(sub), "runs": len(sub)}
    write_json(out / "comparison.json", {"front_size": len(front), "budget": cfg.budget, "runs": rows, "means": means})
    header = "strategy,seed,hits,best_cost,best_nav_time_s"
    lines = [header] + [f"{r['strategy']},{r['seed']},{r['hits']},{r['best_cost']},{r['best_nav_time_s']}" for r in rows]
    _atomic_write(out / "comparison.csv", "\n".join(lines) + "\n")
    for name, m in means.items():
        print(f"{name}: mean front hits {m['mean_hits']:.2f} over {m['runs']} runs (front size {len(front)})")
    return EXIT_OK


def cmd_analyze_trace(args: argparse.Namespace) -> int:
    try:
        with open(args.trace, encoding="utf-8") as fp:
            events = parse_trace(fp)
    except OSError as exc:
        raise ConfigError(f"cannot read trace {args.trace}: {exc.strerror or exc}") from exc
    except TraceParseError as exc:
        raise ConfigError(f"{args.trace}: {exc}") from exc
    try:
        topo = yaml.safe_load(Path(args.topology).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot load topology {args.topology}: {exc}") from exc
    node_inputs = topo.get("node_inputs", topo) if isinstance(topo, dict) else None
    if not isinstance(node_inputs, dict):
        raise ConfigError("topology must map node names to lists of input topics")
    report = build_report(events, {str(k): list(v) for k, v in node_inputs.items()})
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.out:
        _atomic_write(Path(args.out), text + "\n")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="avdse", description="Design-space exploration for autonomous-driving configurations.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def overrides(p: argparse.ArgumentParser, strategy: bool = True) -> None:
        p.add_argument("config", help="exploration config (YAML)")
        if strategy:
            p.add_argument("--strategy", help=f"override strategy ({', '.join(STRATEGY_NAMES)})")
        p.add_argument("--budget", type=int, help="override evaluation budget")
        p.add_argument("--seed", type=int, help="override run seed")
        p.add_argument("--out", help="override output directory")

    p = sub.add_parser("explore", help="run one exploration")
    overrides(p)
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("exhaustive", help="evaluate the whole space and write the truth front")
    overrides(p, strategy=False)
    p.add_argument("--workers", type=int, default=1, help="evaluation threads")
    p.set_defaults(func=cmd_exhaustive)

    p = sub.add_parser("compare", help="compare strategies over seeds at a fixed budget")
    overrides(p, strategy=False)
    p.add_argument("--strategies", default="guided,ga,random", help="comma-separated strategy names")
    p.add_argument("--seeds", default="1-20", help="seed list, e.g. 1-20 or 1,2,5")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("analyze-trace", help="build a performance report from a JSON-lines trace")
    p.add_argument("trace")
    p.add_argument("topology", help="YAML mapping node -> input topics (optionally under node_inputs)")
    p.add_argument("--out", help="also write the report JSON here")
    p.set_defaults(func=cmd_analyze_trace)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, BackendError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except NotImplementedError as exc:
        _err(str(exc))
        return EXIT_EXECUTOR


if __name__ == "__main__":
    sys.exit(main())
