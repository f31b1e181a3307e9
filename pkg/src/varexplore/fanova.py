"""First-order parameter importances by functional ANOVA on a random forest.

A regression forest is fitted to ``unit-cube parameters -> objective``.  Each
tree is a piecewise-constant function whose leaves are axis-aligned boxes
partitioning ``[0, 1]^d``; under the uniform distribution on the cube its
total variance and the variance of every one-dimensional marginal follow in
closed form from the leaf boxes and values.  The importance of parameter
``j`` is the per-tree ratio ``V_j / V`` averaged over the forest.

Tree growing is delegated to scikit-learn's CART implementation; the variance
decomposition is computed here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from .errors import InsufficientData
from .paramspace import SearchSpace, encode_many
from .trialstore.model import Trial, TrialState


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 64
    max_depth: int = 64
    min_samples_leaf: int = 1
    feature_subsample: float = 0.8
    bootstrap: bool = True

    def __post_init__(self):
        if int(self.n_trees) < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0.0 < self.feature_subsample <= 1.0:
            raise ValueError("feature_subsample must lie in (0, 1]")


@dataclass
class RegressionTree:
    """Binary tree with leaf boxes.

    Node arrays follow scikit-learn's layout: ``left[i] == -1`` marks a leaf,
    internal nodes send ``x[feature] <= threshold`` to the left child.
    """

    n_dims: int
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    node_value: np.ndarray
    leaf_lower: np.ndarray = field(init=False)
    leaf_upper: np.ndarray = field(init=False)
    leaf_value: np.ndarray = field(init=False)

    def __post_init__(self):
        lows, highs, vals = [], [], []
        stack = [(0, np.zeros(self.n_dims), np.ones(self.n_dims))]
        while stack:
            node, lo, hi = stack.pop()
            if self.left[node] == -1:
                lows.append(lo)
                highs.append(hi)
                vals.append(self.node_value[node])
                continue
            f = self.feature[node]
            t = min(max(float(self.threshold[node]), lo[f]), hi[f])
            hi_left = hi.copy()
            hi_left[f] = t
            lo_right = lo.copy()
            lo_right[f] = t
            stack.append((self.right[node], lo_right, hi))
            stack.append((self.left[node], lo, hi_left))
        self.leaf_lower = np.array(lows)
        self.leaf_upper = np.array(highs)
        self.leaf_value = np.array(vals, dtype=float)

    @classmethod
    def constant(cls, value: float, n_dims: int) -> "RegressionTree":
        return cls(n_dims, np.array([-2]), np.array([-2.0]), np.array([-1]), np.array([-1]), np.array([value]))

    @classmethod
    def from_sklearn(cls, estimator, n_dims: int) -> "RegressionTree":
        t = estimator.tree_
        return cls(n_dims, t.feature.copy(), t.threshold.copy(), t.children_left.copy(),
                   t.children_right.copy(), t.value[:, 0, 0].copy())

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_value)

    @property
    def leaf_volume(self) -> np.ndarray:
        return np.prod(self.leaf_upper - self.leaf_lower, axis=1)

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(len(X), dtype=int)
        active = self.left[node] != -1
        while active.any():
            idx = np.flatnonzero(active)
            n = node[idx]
            go_left = X[idx, self.feature[n]] <= self.threshold[n]
            node[idx] = np.where(go_left, self.left[n], self.right[n])
            active = self.left[node] != -1
        return self.node_value[node]


@dataclass
class Forest:
    trees: list[RegressionTree]
    config: ForestConfig

    def predict(self, X) -> np.ndarray:
        return np.mean([t.predict(X) for t in self.trees], axis=0)


def fit_forest(X, y, config: ForestConfig | None = None, rng=None) -> Forest:
    """Fit a bootstrap regression forest on unit-cube inputs.

    ``rng`` may be an int seed or a numpy Generator; the same seed gives the
    same forest.
    """
    config = config or ForestConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError(f"X must be (n, d) matching y; got {X.shape} and {y.shape}")
    if len(y) < 2:
        raise InsufficientData(f"need at least 2 rows to fit a forest, got {len(y)}")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    d = X.shape[1]
    if isinstance(rng, np.random.Generator):
        seed = int(rng.integers(2**31 - 1))
    else:
        seed = 0 if rng is None else int(rng)
    if np.ptp(y) == 0:
        return Forest([RegressionTree.constant(float(y[0]), d) for _ in range(config.n_trees)], config)
    max_features = max(1, int(math.ceil(config.feature_subsample * d)))
    rf = RandomForestRegressor(
        n_estimators=int(config.n_trees),
        max_depth=int(config.max_depth),
        min_samples_leaf=int(config.min_samples_leaf),
        max_features=max_features,
        bootstrap=bool(config.bootstrap),
        random_state=seed,
        n_jobs=1,
    )
    rf.fit(X, y)
    return Forest([RegressionTree.from_sklearn(e, d) for e in rf.estimators_], config)


def tree_mean(tree: RegressionTree) -> float:
    return float(np.sum(tree.leaf_volume * tree.leaf_value))


def tree_total_variance(tree: RegressionTree) -> float:
    vol = tree.leaf_volume
    mean = float(np.sum(vol * tree.leaf_value))
    return float(np.sum(vol * (tree.leaf_value - mean) ** 2))


def marginal_function(tree: RegressionTree, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Breakpoints and segment values of ``x_j -> E[f | x_j]``.

    Returns ``(edges, values)`` with ``len(values) == len(edges) - 1``.
    """
    lo, hi = tree.leaf_lower[:, j], tree.leaf_upper[:, j]
    width = hi - lo
    vol = tree.leaf_volume
    edges = np.unique(np.concatenate([[0.0, 1.0], lo, hi]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    inside = (lo[:, None] <= mids[None, :]) & (mids[None, :] < hi[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(width > 0, vol * tree.leaf_value / width, 0.0)
    return edges, weight @ inside


def tree_marginal_variance(tree: RegressionTree, j: int) -> float:
    edges, values = marginal_function(tree, j)
    lengths = np.diff(edges)
    mean = float(np.sum(lengths * values))
    return float(np.sum(lengths * (values - mean) ** 2))


def tree_fractions(tree: RegressionTree) -> np.ndarray:
    """Per-dimension ``V_j / V`` for one tree; zeros for a constant tree."""
    total = tree_total_variance(tree)
    scale = float(np.max(np.abs(tree.leaf_value))) if tree.n_leaves else 0.0
    if total <= (1e-12 * scale) ** 2 or total == 0.0:
        return np.zeros(tree.n_dims)
    return np.array([tree_marginal_variance(tree, j) for j in range(tree.n_dims)]) / total


@dataclass
class ImportanceReport:
    entries: list[tuple[str, float]]
    trial_count: int
    objective_index: int = 0
    metric: str | None = None
    degenerate: bool = False

    def as_dict(self) -> dict[str, float]:
        return dict(self.entries)

    def to_dict(self) -> dict:
        return {
            "trial_count": self.trial_count,
            "objective_index": self.objective_index,
            "metric": self.metric,
            "degenerate": self.degenerate,
            "importances": {name: value for name, value in self.entries},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ImportanceReport":
        return cls(entries=[(k, float(v)) for k, v in doc["importances"].items()],
                   trial_count=int(doc["trial_count"]), objective_index=int(doc.get("objective_index", 0)),
                   metric=doc.get("metric"), degenerate=bool(doc.get("degenerate", False)))


def _ordered(names: Sequence[str], values: Sequence[float]) -> list[tuple[str, float]]:
    return sorted(zip(names, (float(v) for v in values)), key=lambda kv: (-kv[1], kv[0]))


def importances(trials: Sequence[Trial], space: SearchSpace, objective_index: int = 0,
                config: ForestConfig | None = None, seed: int = 0, metric: str | None = None) -> ImportanceReport:
    """Importance report for one objective from Complete trials.

    The forest seed is derived from ``seed`` and the number of usable trials,
    and rows are put in a canonical order first, so the report depends on the
    set of trials and not on the order they are passed in.
    """
    usable = [t for t in trials if t.state is TrialState.COMPLETE and t.values is not None]
    names = space.names
    if len(usable) < 2:
        raise InsufficientData(f"need at least 2 completed trials, got {len(usable)}")
    X = encode_many(space, [t.params for t in usable])
    y = np.array([t.values[objective_index] for t in usable], dtype=float)
    if np.ptp(y) == 0:
        return ImportanceReport(_ordered(names, np.zeros(len(names))), len(usable), objective_index,
                                metric, degenerate=True)
    order = np.lexsort((y,) + tuple(X[:, j] for j in reversed(range(X.shape[1]))))
    X, y = X[order], y[order]
    tree_seed = int(np.random.SeedSequence([int(seed), len(usable)]).generate_state(1)[0] >> 1)
    # Fractions are scale-free.  Standardise and round so that affinely related
    # targets give bit-identical inputs; otherwise last-digit noise flips
    # exact split ties (e.g. two-sample nodes) between features.
    y = np.round((y - y.mean()) / y.std(), 10)
    forest = fit_forest(X, y, config, tree_seed)
    fractions = np.mean([tree_fractions(t) for t in forest.trees], axis=0)
    return ImportanceReport(_ordered(names, fractions), len(usable), objective_index, metric)
