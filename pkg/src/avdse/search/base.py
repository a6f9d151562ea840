"""Common strategy types: proposals, the strategy interface and shared helpers."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from ..design_space import DesignPoint, DesignSpace, enumerate_space, hardware_cost
from ..memory import MemoryRecord
from ..rng import substream

History = Sequence[MemoryRecord]


class ExhaustedSpaceError(RuntimeError):
    """No unevaluated point remains and the strategy did not request termination."""


@dataclass(frozen=True)
class Proposal:
    point: DesignPoint
    rationale: str
    terminate: bool = False


class Strategy(ABC):
    """Stateful proposal generator owned by one exploration run."""

    name: str = "abstract"
    allows_reevaluation: bool = False

    def __init__(self) -> None:
        self._rng: np.random.Generator | None = None
        self._seed: int | None = None

    def rng(self, seed: int) -> np.random.Generator:
        """Strategy sub-stream, created on first use and reused thereafter."""
        if self._rng is None or self._seed != seed:
            self._rng = substream(seed, f"strategy/{self.name}")
            self._seed = seed
        return self._rng

    @abstractmethod
    def propose(self, history: History, last_report: Any, space: DesignSpace, rng_seed: int) -> Proposal: ...


def unevaluated(space: DesignSpace, history: History) -> list[DesignPoint]:
    seen = {r.point for r in history}
    return [p for p in enumerate_space(space) if p not in seen]


def cost_key(p: DesignPoint) -> tuple:
    """Tie-break order: lower cost first, then lexicographic."""
    return (hardware_cost(p), p.as_tuple())


def random_point(space: DesignSpace, rng: np.random.Generator) -> DesignPoint:
    return space.point_at(tuple(int(rng.integers(n)) for n in space.shape))
