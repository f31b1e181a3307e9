"""Tree-structured Parzen estimator for single-objective studies.

Each dimension is modelled independently on its unit-cube encoding.  Numeric
dimensions use a mixture of Gaussians truncated to [0, 1], one per observed
point, plus a flat prior component; categorical dimensions use add-one
smoothed frequencies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from ..errors import MultiObjectiveUnsupported
from ..paramspace import Categorical, SearchSpace
from ..pareto import MINIMIZE
from .base import Sampler, random_suggest


@dataclass(frozen=True)
class TpeConfig:
    gamma: float = 0.25
    n_startup: int = 10
    n_candidates: int = 24
    kde_bandwidth_rule: str = "scott"
    min_bandwidth: float = 0.01
    prior_weight: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if int(self.n_startup) < 1:
            raise ValueError("n_startup must be >= 1")
        if int(self.n_candidates) < 1:
            raise ValueError("n_candidates must be >= 1")
        if self.kde_bandwidth_rule not in ("scott", "silverman"):
            raise ValueError(f"unknown bandwidth rule {self.kde_bandwidth_rule!r}")


class ParzenEstimator:
    """1-D truncated Gaussian mixture on [0, 1] with a uniform prior component."""

    def __init__(self, obs: np.ndarray, config: TpeConfig):
        obs = np.asarray(obs, dtype=float)
        n = len(obs)
        self.centers = obs
        if n >= 2 and np.std(obs) > 0:
            factor = 1.06 if config.kde_bandwidth_rule == "scott" else 0.9
            h = factor * float(np.std(obs)) * n ** -0.2
        else:
            h = config.min_bandwidth
        self.bandwidth = min(max(h, config.min_bandwidth), 1.0)
        w_prior = config.prior_weight
        total = n + w_prior
        self.w_obs = 1.0 / total
        self.w_prior = w_prior / total
        self._lo = ndtr((0.0 - obs) / self.bandwidth)
        self._mass = ndtr((1.0 - obs) / self.bandwidth) - self._lo

    def pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = self.bandwidth
        z = (x[:, None] - self.centers[None, :]) / h
        kern = np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * h) / self._mass[None, :]
        return self.w_obs * kern.sum(axis=1) + self.w_prior

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        n = len(self.centers)
        weights = np.append(np.full(n, self.w_obs), self.w_prior)
        comp = rng.choice(n + 1, size=size, p=weights / weights.sum())  # index n is the prior
        u = rng.random(size)
        out = np.empty(size)
        prior = comp == n
        out[prior] = u[prior]
        k = comp[~prior]
        if k.size:
            p = self._lo[k] + u[~prior] * self._mass[k]
            out[~prior] = self.centers[k] + self.bandwidth * ndtri(np.clip(p, 1e-300, 1 - 1e-16))
        return np.clip(out, 0.0, 1.0)


def _categorical_probs(idx: np.ndarray, k: int, prior_weight: float) -> np.ndarray:
    counts = np.bincount(idx.astype(int), minlength=k).astype(float)
    return (counts + prior_weight) / (counts.sum() + prior_weight * k)


class TPESampler(Sampler):
    name = "TPESampler"
    config_class = TpeConfig
    multi_objective = False

    def __init__(self, config: TpeConfig | None = None):
        self.config = config or TpeConfig()

    def check_directions(self, directions):
        if len(directions) != 1:
            raise MultiObjectiveUnsupported(
                f"TPESampler handles a single objective; study has {len(directions)}")

    def split(self, history, directions):
        sign = 1.0 if directions[0] == MINIMIZE else -1.0
        order = sorted(range(len(history)), key=lambda i: (sign * history[i].values[0], i))
        n_good = max(1, int(math.ceil(self.config.gamma * len(history))))
        return [history[i] for i in order[:n_good]], [history[i] for i in order[n_good:]]

    def suggest(self, space, history, directions, rng):
        self.check_directions(directions)
        cfg = self.config
        if len(history) < cfg.n_startup or len(space) == 0:
            return random_suggest(space, rng)
        good, bad = self.split(history, directions)
        m = int(cfg.n_candidates)
        score = np.zeros(m)
        columns = []
        for spec in space.specs:
            if isinstance(spec, Categorical):
                k = len(spec.choices)
                g_idx = np.array([spec.index(t.params[spec.name]) for t in good])
                b_idx = np.array([spec.index(t.params[spec.name]) for t in bad], dtype=int)
                p_good = _categorical_probs(g_idx, k, cfg.prior_weight)
                p_bad = _categorical_probs(b_idx, k, cfg.prior_weight)
                cand = rng.choice(k, size=m, p=p_good)
                score += np.log(p_good[cand]) - np.log(p_bad[cand])
                columns.append([spec.choices[c] for c in cand])
            else:
                l_est = ParzenEstimator(np.array([spec.to_unit(t.params[spec.name]) for t in good]), cfg)
                g_est = ParzenEstimator(np.array([spec.to_unit(t.params[spec.name]) for t in bad]), cfg)
                cand = l_est.sample(m, rng)
                score += np.log(l_est.pdf(cand)) - np.log(g_est.pdf(cand))
                columns.append([spec.from_unit(c) for c in cand])
        best = int(np.argmax(score))
        return {spec.name: col[best] for spec, col in zip(space.specs, columns)}


def tpe_suggest(space: SearchSpace, history: Sequence, directions, config: TpeConfig | None, rng) -> dict:
    return TPESampler(config).suggest(space, history, directions, rng)
