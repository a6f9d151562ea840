"""Genetic-algorithm baseline over index chromosomes (core, frequency, lidar indices)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from ..design_space import Constraints, DesignPoint, DesignSpace, enumerate_space, is_feasible
from .base import ExhaustedSpaceError, History, Proposal, Strategy, cost_key, random_point, unevaluated

Genes = tuple[int, ...]

MAX_REMUTATIONS = 50


@dataclass(frozen=True)
class GAParams:
    population: int = 5
    tournament_size: int = 2
    p_mut: float = 0.2
    elitism: int = 1
    penalty_factor: float = 10.0  # infeasible fitness penalty, in multiples of the scenario timeout

    def __post_init__(self) -> None:
        if self.population < 1 or self.tournament_size < 1:
            raise ValueError("population and tournament_size must be >= 1")
        if not 0.0 <= self.p_mut <= 1.0:
            raise ValueError("p_mut must lie in [0, 1]")
        if not 0 <= self.elitism <= self.population:
            raise ValueError("elitism must lie in [0, population]")


def crossover(a: Genes, b: Genes, cut: int) -> Genes:
    """One-point crossover: genes before ``cut`` from ``a``, the rest from ``b``."""
    if not 0 <= cut <= len(a):
        raise ValueError("cut out of range")
    return tuple(a[:cut]) + tuple(b[cut:])


def mutate(genes: Genes, shape: Sequence[int], p_mut: float, rng: np.random.Generator) -> Genes:
    """Per-gene mutation to a uniformly drawn *other* index; single-value axes never change."""
    out = list(genes)
    for i, n in enumerate(shape):
        if n > 1 and rng.random() < p_mut:
            other = int(rng.integers(n - 1))
            out[i] = other if other < out[i] else other + 1
    return tuple(out)


def fitness(metrics, constraints: Constraints, timeout_s: float, params: GAParams) -> float:
    f = -metrics.nav_time_s
    if not is_feasible(metrics, constraints):
        f -= params.penalty_factor * timeout_s
    return f


def _rank_key(item: tuple[DesignPoint, float]) -> tuple:
    p, f = item
    return (-f,) + cost_key(p)


def _tournament(population: Sequence[tuple[DesignPoint, float]], k: int, rng: np.random.Generator) -> DesignPoint:
    picks = [population[int(rng.integers(len(population)))] for _ in range(k)]
    return min(picks, key=_rank_key)[0]


def genetic_step(
    population: Sequence[tuple[DesignPoint, float]],
    params: GAParams,
    rng: np.random.Generator,
    space: DesignSpace,
) -> list[DesignPoint]:
    """Next generation: elites first, then tournament-selected, crossed and mutated children."""
    if not population:
        raise ValueError("population must be non-empty")
    if not all(np.isfinite(f) for _, f in population):
        raise ValueError("fitness values must be finite")
    ranked = sorted(population, key=_rank_key)
    nxt = [p for p, _ in ranked[: params.elitism]]
    n_genes = len(space.shape)
    while len(nxt) < params.population:
        a = space.index_of(_tournament(population, params.tournament_size, rng))
        b = space.index_of(_tournament(population, params.tournament_size, rng))
        cut = int(rng.integers(1, n_genes)) if n_genes > 1 else 0
        child = mutate(crossover(a, b, cut), space.shape, params.p_mut, rng)
        nxt.append(space.point_at(child))
    return nxt


class GeneticStrategy(Strategy):
    """Evaluates a generation one individual per proposal, then breeds the next.

    Children that repeat an evaluated point are re-mutated so every proposal
    spends budget on a new point; elites keep their recorded fitness.
    """

    name = "ga"

    def __init__(self, params: GAParams | None = None, constraints: Constraints | None = None, timeout_s: float = 1800.0):
        super().__init__()
        self.params = params or GAParams()
        self.constraints = constraints or Constraints()
        self.timeout_s = timeout_s
        self._pending: list[DesignPoint] = []
        self._generation: list[DesignPoint] = []
        self.generations = 0

    def _fresh(self, p: DesignPoint, taken: set[DesignPoint], space: DesignSpace, rng: np.random.Generator) -> DesignPoint:
        genes = space.index_of(p)
        for _ in range(MAX_REMUTATIONS):
            if p not in taken:
                return p
            genes = mutate(genes, space.shape, max(self.params.p_mut, 1.0 / len(genes)), rng)
            p = space.point_at(genes)
        remaining = [q for q in enumerate_space(space) if q not in taken]
        if not remaining:
            raise ExhaustedSpaceError("every point of the space has been evaluated")
        return remaining[int(rng.integers(len(remaining)))]

    def _next_generation(self, history: History, space: DesignSpace, rng: np.random.Generator) -> None:
        by_point = {r.point: r.metrics for r in history}
        if not self._generation:
            members = []
            taken = set(by_point)
            while len(members) < self.params.population:
                p = self._fresh(random_point(space, rng), taken, space, rng)
                members.append(p)
                taken.add(p)
            self._generation = members
            self._pending = list(members)
            return
        scored = [(p, fitness(by_point[p], self.constraints, self.timeout_s, self.params)) for p in self._generation]
        children = genetic_step(scored, self.params, rng, space)
        elites = children[: self.params.elitism]
        taken = set(by_point) | set(elites)
        fresh = []
        for c in children[self.params.elitism :]:
            c = self._fresh(c, taken, space, rng)
            taken.add(c)
            fresh.append(c)
        self._generation = elites + fresh
        self._pending = fresh
        self.generations += 1

    def propose(self, history: History, last_report: Any, space: DesignSpace, rng_seed: int) -> Proposal:
        rng = self.rng(rng_seed)
        seen = {r.point for r in history}
        self._pending = [p for p in self._pending if p not in seen]
        while not self._pending:
            if not unevaluated(space, history):
                raise ExhaustedSpaceError("every point of the space has been evaluated")
            self._next_generation(history, space, rng)
            self._pending = [p for p in self._pending if p not in seen]
        p = self._pending.pop(0)
        return Proposal(p, f"generation {self.generations} individual")

