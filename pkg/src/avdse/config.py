"""Exploration configuration: one YAML file with scenario, space, strategy and run sections."""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import yaml

from .design_space import DesignSpace
from .scenario import ScenarioError, ScenarioSpec, scenario_from_dict
from .search import STRATEGY_NAMES

BUNDLED_CONFIG = "robotaxi.yaml"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True, eq=True)
class ExplorationConfig:
    scenario: ScenarioSpec
    space: DesignSpace
    strategy: str
    strategy_params: dict = field(default_factory=dict)
    budget: int = 15
    seed: int = 1
    output_dir: str = "runs/default"
    llm: dict | None = None

    __hash__ = None  # type: ignore[assignment]  # holds mutable mappings

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGY_NAMES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {', '.join(STRATEGY_NAMES)}")
        if isinstance(self.budget, bool) or not isinstance(self.budget, int) or self.budget < 1:
            raise ConfigError(f"budget must be an integer >= 1, got {self.budget!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")

    def with_overrides(
        self, strategy: str | None = None, budget: int | None = None, seed: int | None = None, out: str | None = None
    ) -> "ExplorationConfig":
        changes: dict = {}
        if strategy is not None and strategy != self.strategy:
            # parameters belong to the configured strategy; an override starts from defaults
            changes.update(strategy=strategy, strategy_params={})
        if budget is not None:
            changes["budget"] = budget
        if seed is not None:
            changes["seed"] = seed
        if out is not None:
            changes["output_dir"] = str(out)
        return replace(self, **changes) if changes else self

    def to_dict(self) -> dict:
        d = {
            "scenario": self.scenario.to_dict(),
            "space": self.space.to_dict(),
            "strategy": {"name": self.strategy, "params": copy.deepcopy(self.strategy_params)},
            "budget": self.budget,
            "seed": self.seed,
            "output_dir": self.output_dir,
        }
        if self.llm is not None:
            d["llm"] = copy.deepcopy(self.llm)
        return d


def config_from_dict(d: dict, base_dir: str | os.PathLike | None = None) -> ExplorationConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    missing = [k for k in ("scenario", "strategy") if k not in d]
    if missing:
        raise ConfigError("missing required section(s): " + ", ".join(missing))
    try:
        scenario = scenario_from_dict(d["scenario"])
    except ScenarioError as exc:
        raise ConfigError(f"scenario: {exc}", exc.line) from exc
    try:
        space = DesignSpace.from_dict(d.get("space") or {})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"space: {exc}") from exc
    strat = d["strategy"]
    if isinstance(strat, str):
        strat = {"name": strat}
    if not isinstance(strat, dict) or "name" not in strat:
        raise ConfigError("strategy section needs a name")
    llm = d.get("llm")
    if llm is not None:
        llm = dict(llm)
        if "path" in llm and base_dir is not None and not os.path.isabs(llm["path"]):
            llm["path"] = str(Path(base_dir, llm["path"]).resolve())
    return ExplorationConfig(
        scenario=scenario,
        space=space,
        strategy=str(strat["name"]),
        strategy_params=dict(strat.get("params") or {}),
        budget=d.get("budget", 15),
        seed=d.get("seed", 1),
        output_dir=str(d.get("output_dir", "runs/default")),
        llm=llm,
    )


def config_from_text(text: str, base_dir: str | os.PathLike | None = None) -> ExplorationConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"parse error: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None) from exc
    return config_from_dict(doc, base_dir)


def load_config(path: str | os.PathLike) -> ExplorationConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return config_from_text(text, Path(path).parent)


def dump_config(cfg: ExplorationConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def bundled_config_text(name: str = BUNDLED_CONFIG) -> str:
    return resources.files("avdse").joinpath("data", name).read_text(encoding="utf-8")


def bundled_config_path(name: str = BUNDLED_CONFIG) -> Path:
    return Path(str(resources.files("avdse").joinpath("data", name)))
