"""Design-point proposal strategies."""

from __future__ import annotations

from typing import Any

from ..design_space import Constraints
from .base import ExhaustedSpaceError, History, Proposal, Strategy
from .genetic import GAParams, GeneticStrategy, genetic_step
from .guided import GuidedParams, GuidedStrategy, guided_rules
from .llm import LLMStrategy, ScriptedBackend, UnparseableResponseError, assemble_prompts, parse_llm_proposal
from .simple import ExhaustiveStrategy, RandomStrategy

STRATEGY_NAMES = ("exhaustive", "random", "ga", "guided", "llm")

__all__ = [
    "STRATEGY_NAMES",
    "ExhaustedSpaceError",
    "ExhaustiveStrategy",
    "GAParams",
    "GeneticStrategy",
    "GuidedParams",
    "GuidedStrategy",
    "History",
    "LLMStrategy",
    "Proposal",
    "RandomStrategy",
    "ScriptedBackend",
    "Strategy",
    "UnparseableResponseError",
    "assemble_prompts",
    "genetic_step",
    "guided_rules",
    "make_strategy",
    "parse_llm_proposal",
]


def make_strategy(
    name: str,
    params: dict | None = None,
    *,
    constraints: Constraints | None = None,
    timeout_s: float = 1800.0,
    task: Any = None,
    backend: Any = None,
) -> Strategy:
    """Instantiate a strategy by name with the parameters of the config's strategy section."""
    params = dict(params or {})
    if name == "exhaustive":
        return ExhaustiveStrategy()
    if name == "random":
        return RandomStrategy()
    if name == "ga":
        return GeneticStrategy(GAParams(**params), constraints, timeout_s)
    if name == "guided":
        if params.get("initial_point") is not None:
            params["initial_point"] = tuple(params["initial_point"])
        return GuidedStrategy(GuidedParams(**params), constraints)
    if name == "llm":
        if backend is None:
            raise ValueError("the llm strategy needs a completion backend")
        guided = params.pop("guided", None)
        return LLMStrategy(
            backend,
            task=task,
            constraints=constraints,
            k_recent=int(params.pop("k_recent", 3)),
            timeout_s=params.pop("timeout_s", 120.0),
            guided=GuidedParams(**guided) if guided else None,
        )
    raise ValueError(f"unknown strategy {name!r}; expected one of {', '.join(STRATEGY_NAMES)}")
