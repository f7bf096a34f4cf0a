"""Greedy CART regression trees with per-node feature subsampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _cart


@dataclass(frozen=True)
class TreeConfig:
    """Tree-growing controls.

    ``mtry=None`` means "all features" and is resolved at fit time.
    ``max_depth=None`` grows until the size/purity rules stop it.
    """

    mtry: int | None = None
    min_node_size: int = 5
    max_depth: int | None = None

    def __post_init__(self):
        if self.mtry is not None and self.mtry < 1:
            raise ValueError(f"mtry must be positive, got {self.mtry}")
        if self.min_node_size < 1:
            raise ValueError(f"min_node_size must be positive, got {self.min_node_size}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be positive, got {self.max_depth}")

    def resolve_mtry(self, p: int) -> int:
        mtry = p if self.mtry is None else self.mtry
        if mtry > p:
            raise ValueError(f"mtry={mtry} exceeds the {p} available features")
        return mtry


@dataclass(frozen=True, eq=False)
class RegressionTree:
    # Node arena: ``feature[k] == -1`` marks a leaf; children by index.
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    count: np.ndarray
    config: TreeConfig
    n_features: int
    rng_seed: int

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature == _cart.LEAF))

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == _cart.LEAF

    def predict(self, X) -> np.ndarray:
        X = _check_matrix(X, self.n_features)
        return _cart.predict(self.feature, self.threshold, self.left, self.right, self.value, X)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = _check_matrix(X, self.n_features)
        return _cart.apply(self.feature, self.threshold, self.left, self.right, X)


def _check_matrix(X, p: int) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != p:
        raise ValueError(f"expected a matrix with {p} columns, got shape {X.shape}")
    return X


def fit_tree(X, y, config: TreeConfig, seed: int) -> RegressionTree:
    """Grow one tree minimising the children's summed squared error at each split.

    A node becomes a leaf when it holds fewer than ``2 * min_node_size``
    rows, its responses are all equal, ``max_depth`` is reached, or no split
    leaving at least ``min_node_size`` rows per child lowers the error.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"incompatible shapes X{X.shape}, y{y.shape}")
    n, p = X.shape
    if n < 1:
        raise ValueError("cannot fit a tree on zero rows")
    if p < 1:
        raise ValueError("cannot fit a tree on zero features")
    XT = np.ascontiguousarray(X.T)
    return _grow(XT, y, np.argsort(XT, axis=1, kind="stable"), config, seed)


def _grow(XT, y, order, config: TreeConfig, seed: int) -> RegressionTree:
    # ``order`` is consumed (overwritten) by the kernel
    p = XT.shape[0]
    mtry = config.resolve_mtry(p)
    max_depth = -1 if config.max_depth is None else config.max_depth
    arrays = _cart.grow(XT, y, order, mtry, config.min_node_size, max_depth, int(seed))
    for a in arrays:
        a.setflags(write=False)
    return RegressionTree(*arrays, config=config, n_features=p, rng_seed=int(seed))


class PresortedDesign:
    """A design sorted once, from which resampled trees are grown cheaply."""

    def __init__(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        self.XT = np.ascontiguousarray(X.T)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.order = np.argsort(self.XT, axis=1, kind="stable")
        self.n = X.shape[0]

    def fit(self, counts, config: TreeConfig, seed: int) -> RegressionTree:
        """Tree on the resample holding ``counts[i]`` copies of row ``i``.

        Copies are laid out grouped by source row, so the result equals
        ``fit_tree(X[rows], y[rows])`` with ``rows = np.repeat(arange(n), counts)``.
        """
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (self.n,) or counts.sum() < 1:
            raise ValueError("counts must hold one nonnegative entry per row")
        rows = np.repeat(np.arange(self.n), counts)
        order = _cart.expand_order(self.order, counts)
        XT = np.ascontiguousarray(self.XT[:, rows])
        return _grow(XT, self.y[rows], order, config, seed)


def predict_tree(tree: RegressionTree, x) -> float:
    """Prediction for a single point ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != tree.n_features:
        raise ValueError(f"expected a vector of length {tree.n_features}, got shape {x.shape}")
    return float(tree.predict(x[None, :])[0])
