"""NSGA-II over a shared, interleaved trial history.

Several agents write into one study, so there is no private population.
Generations are recovered from the global completion order instead: the
Complete trials are cut into consecutive blocks of ``population_size``; block
0 is the first parent population and every later block competes with the
current parents for ``population_size`` survivors (rank first, crowding
second).  Trials in the trailing, not yet full block are offspring still
being produced and do not take part in selection.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..paramspace import Categorical, SearchSpace
from ..pareto import crowding_distance, nondominated_sort
from ..trialstore.model import Trial
from .base import Sampler, random_suggest


@dataclass(frozen=True)
class NsgaConfig:
    population_size: int = 24
    crossover_prob: float = 0.9
    mutation_prob: float | None = None  # None -> 1 / number of dimensions
    eta_crossover: float = 15.0
    eta_mutation: float = 20.0
    swap_prob: float = 0.5  # per-dimension chance that SBX touches a variable

    def __post_init__(self):
        if int(self.population_size) < 2:
            raise ValueError("population_size must be >= 2")
        for name in ("crossover_prob", "mutation_prob", "swap_prob"):
            p = getattr(self, name)
            if p is not None and not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")


@dataclass
class Member:
    trial: Trial
    rank: int
    crowding: float


def rank_and_crowd(trials: Sequence[Trial], directions) -> list[Member]:
    values = [t.values for t in trials]
    members = [None] * len(trials)
    for rank, front in enumerate(nondominated_sort(values, directions)):
        crowd = crowding_distance([values[i] for i in front])
        for i, c in zip(front, crowd):
            members[i] = Member(trials[i], rank, float(c))
    return members


def environmental_selection(pool: Sequence[Trial], size: int, directions) -> list[Trial]:
    members = rank_and_crowd(pool, directions)
    members.sort(key=lambda m: (m.rank, -m.crowding, m.trial.trial_id))
    return [m.trial for m in members[:size]]


def tournament(population: Sequence[Member], rng: np.random.Generator) -> Member:
    """Binary tournament on (rank asc, crowding desc, trial id asc)."""
    i, j = rng.integers(len(population), size=2)
    return min(population[i], population[j], key=_tournament_key)


def _tournament_key(m: Member):
    return (m.rank, -m.crowding, m.trial.trial_id)


def sbx_pair(y1: float, y2: float, eta: float, rng: np.random.Generator) -> tuple[float, float]:
    """Bounded simulated binary crossover on [0, 1]."""
    u = rng.random()
    if abs(y1 - y2) < 1e-14:
        return y1, y2
    lo, hi = (y1, y2) if y1 < y2 else (y2, y1)
    gap = hi - lo

    def spread(beta):
        alpha = 2.0 - beta ** -(eta + 1.0)
        if u <= 1.0 / alpha:
            return (u * alpha) ** (1.0 / (eta + 1.0))
        return (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0))

    c1 = 0.5 * ((lo + hi) - spread(1.0 + 2.0 * lo / gap) * gap)
    c2 = 0.5 * ((lo + hi) + spread(1.0 + 2.0 * (1.0 - hi) / gap) * gap)
    return min(max(c1, 0.0), 1.0), min(max(c2, 0.0), 1.0)


def polynomial_mutation(y: float, eta: float, rng: np.random.Generator) -> float:
    """Bounded polynomial mutation on [0, 1]."""
    r = rng.random()
    power = 1.0 / (eta + 1.0)
    if r < 0.5:
        xy = 1.0 - y
        val = 2.0 * r + (1.0 - 2.0 * r) * xy ** (eta + 1.0)
        dq = val ** power - 1.0
    else:
        xy = y
        val = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * xy ** (eta + 1.0)
        dq = 1.0 - val ** power
    return min(max(y + dq, 0.0), 1.0)


class NSGAIISampler(Sampler):
    name = "NSGAIISampler"
    config_class = NsgaConfig

    def __init__(self, config: NsgaConfig | None = None):
        self.config = config or NsgaConfig()

    def parent_population(self, history: Sequence[Trial], directions) -> list[Member]:
        size = int(self.config.population_size)
        n_blocks = len(history) // size
        parents = list(history[:size])
        for b in range(1, n_blocks):
            pool = parents + list(history[b * size:(b + 1) * size])
            parents = environmental_selection(pool, size, directions)
        return rank_and_crowd(parents, directions)

    def suggest(self, space, history, directions, rng):
        cfg = self.config
        if len(history) < cfg.population_size or len(space) == 0:
            return random_suggest(space, rng)
        population = self.parent_population(history, directions)
        a = tournament(population, rng).trial.params
        b = tournament(population, rng).trial.params

        d = len(space)
        pm = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / d
        cross = rng.random() < cfg.crossover_prob
        child = {}
        for spec in space.specs:
            if isinstance(spec, Categorical):
                value = a[spec.name]
                if cross and rng.random() < 0.5:
                    value = b[spec.name]
                if rng.random() < pm:
                    value = spec.sample(rng)
                child[spec.name] = value
                continue
            y = spec.to_unit(a[spec.name])
            if cross and rng.random() < cfg.swap_prob:
                c1, c2 = sbx_pair(y, spec.to_unit(b[spec.name]), cfg.eta_crossover, rng)
                y = c1 if rng.random() < 0.5 else c2
            if rng.random() < pm:
                y = polynomial_mutation(y, cfg.eta_mutation, rng)
            child[spec.name] = spec.from_unit(y)
        return child


def nsga2_suggest(space: SearchSpace, history, directions, config: NsgaConfig | None, rng) -> dict:
    return NSGAIISampler(config).suggest(space, history, directions, rng)
