"""Isolation forest built from scratch.

Each tree partitions a small subsample with uniformly random axis cuts;
points that isolate in short paths are anomalous. The score for a point
with average path length E[h] over the forest is

    s = 2 ** (-E[h] / c(psi))

where c(m) = 2 H(m-1) - 2 (m-1)/m is the average unsuccessful-search
path length of a binary search tree over m points and H(i) is the
harmonic number, approximated as ln(i) + Euler-Mascheroni for all i >= 1.
Scores live in (0, 1]: E[h] = c(psi) lands exactly on 0.5, shorter paths
push toward 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .common import AnomalyScore, DimensionMismatch, TooFewSamples

EULER_GAMMA = 0.5772156649

DEFAULT_N_TREES = 100
DEFAULT_SUBSAMPLE = 256

_EXTERNAL = -1  # feature index marking a leaf


def harmonic(i: int) -> float:
    return math.log(i) + EULER_GAMMA


def average_path_length(m: int) -> float:
    """c(m): expected unsuccessful-search depth in a BST of m points."""
    if m <= 1:
        return 0.0
    return 2.0 * harmonic(m - 1) - 2.0 * (m - 1) / m


@dataclass(frozen=True)
class IsolationTree:
    """Flat node arrays; node 0 is the root, feature == -1 marks leaves."""

    feature: np.ndarray    # int32
    threshold: np.ndarray  # float64
    left: np.ndarray       # int32
    right: np.ndarray      # int32
    size: np.ndarray       # int32, sample count at the node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass(frozen=True)
class IsolationForestModel:
    trees: tuple[IsolationTree, ...]
    n_features: int
    subsample_size: int
    height_limit: int
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)


class _TreeBuilder:
    def __init__(self, X: np.ndarray, height_limit: int, rng: np.random.Generator):
        self.X = X
        self.height_limit = height_limit
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.size: list[int] = []

    def _push(self) -> int:
        self.feature.append(_EXTERNAL)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.size.append(0)
        return len(self.feature) - 1

    def build(self, idx: np.ndarray, depth: int) -> int:
        node = self._push()
        self.size[node] = len(idx)
        rows = self.X[idx]
        if len(idx) <= 1 or depth >= self.height_limit or (rows == rows[0]).all():
            return node
        q = int(self.rng.integers(rows.shape[1]))
        lo = float(rows[:, q].min())
        hi = float(rows[:, q].max())
        p = float(self.rng.uniform(lo, hi))
        goes_left = rows[:, q] < p
        self.feature[node] = q
        self.threshold[node] = p
        self.left[node] = self.build(idx[goes_left], depth + 1)
        self.right[node] = self.build(idx[~goes_left], depth + 1)
        return node

    def finish(self) -> IsolationTree:
        return IsolationTree(
            feature=np.array(self.feature, dtype=np.int32),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int32),
            right=np.array(self.right, dtype=np.int32),
            size=np.array(self.size, dtype=np.int32),
        )


def if_fit(train: np.ndarray, n_trees: int = DEFAULT_N_TREES,
           subsample_size: int = DEFAULT_SUBSAMPLE, seed: int = 0) -> IsolationForestModel:
    """Fit an isolation forest; deterministic in (data, hyperparameters, seed).

    Each tree sees its own subsample of `subsample_size` rows, drawn
    without replacement (with replacement when the data is smaller than
    the subsample). Splitting stops at the height limit ceil(log2 psi),
    at single-point nodes, and at nodes whose rows are all identical.
    """
    X = np.asarray(train, dtype=np.float64)
    if X.ndim != 2:
        raise TooFewSamples("training data must be a 2-D matrix")
    n, d = X.shape
    if n < 2:
        raise TooFewSamples(f"need at least 2 training rows, got {n}")
    if n_trees < 1 or subsample_size < 2:
        raise ValueError("need n_trees >= 1 and subsample_size >= 2")
    height_limit = math.ceil(math.log2(subsample_size))
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_trees):
        if n >= subsample_size:
            idx = rng.choice(n, size=subsample_size, replace=False)
        else:
            idx = rng.choice(n, size=subsample_size, replace=True)
        builder = _TreeBuilder(X, height_limit, rng)
        builder.build(idx, depth=0)
        trees.append(builder.finish())
    return IsolationForestModel(
        trees=tuple(trees), n_features=d,
        subsample_size=subsample_size, height_limit=height_limit, seed=seed,
    )


def _path_lengths(tree: IsolationTree, X: np.ndarray) -> np.ndarray:
    """Vectorized root-to-leaf descent for every row at once."""
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    depth = np.zeros(n, dtype=np.float64)
    active = tree.feature[node] != _EXTERNAL
    while active.any():
        current = node[active]
        q = tree.feature[current]
        goes_left = X[active, q] < tree.threshold[current]
        node[active] = np.where(goes_left, tree.left[current], tree.right[current])
        depth[active] += 1.0
        active = tree.feature[node] != _EXTERNAL
    leaf_sizes = tree.size[node]
    tail = np.array([average_path_length(int(m)) for m in leaf_sizes])
    return depth + tail


def if_score_batch(model: IsolationForestModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(
            f"model expects {model.n_features} features, got shape {X.shape}")
    total = np.zeros(X.shape[0])
    for tree in model.trees:
        total += _path_lengths(tree, X)
    expected = total / model.n_trees
    return 2.0 ** (-expected / average_path_length(model.subsample_size))


def if_score(model: IsolationForestModel, x: np.ndarray) -> AnomalyScore:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("if_score takes a single feature vector")
    value = float(if_score_batch(model, x[None, :])[0])
    return AnomalyScore(value=value, normalized=True)
