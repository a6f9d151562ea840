"""Baseline strategies: full enumeration and uniform random sampling."""

from __future__ import annotations

from typing import Any

from ..design_space import DesignSpace
from .base import ExhaustedSpaceError, History, Proposal, Strategy, unevaluated


class ExhaustiveStrategy(Strategy):
    """Walks the enumeration order, skipping evaluated points."""

    name = "exhaustive"

    def propose(self, history: History, last_report: Any, space: DesignSpace, rng_seed: int) -> Proposal:
        remaining = unevaluated(space, history)
        if not remaining:
            raise ExhaustedSpaceError("every point of the space has been evaluated")
        return Proposal(remaining[0], "next point in enumeration order")


class RandomStrategy(Strategy):
    """Uniform sampling without replacement from the unevaluated points."""

    name = "random"

    def propose(self, history: History, last_report: Any, space: DesignSpace, rng_seed: int) -> Proposal:
        remaining = unevaluated(space, history)
        if not remaining:
            raise ExhaustedSpaceError("every point of the space has been evaluated")
        rng = self.rng(rng_seed)
        return Proposal(remaining[int(rng.integers(len(remaining)))], "uniform random sample")
