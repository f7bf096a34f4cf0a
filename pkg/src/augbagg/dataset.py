"""Tabular regression data: loading, splitting and response perturbation."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .errors import FormatError, PolicyError
from .rng import rng

Kind = Literal["continuous", "categorical-encoded"]
Origin = Literal["original", "noise"]


@dataclass(frozen=True)
class FeatureMeta:
    name: str
    kind: Kind = "continuous"
    origin: Origin = "original"


def sample_variance(y: np.ndarray) -> float:
    """Unbiased (n - 1) sample variance; 0 for fewer than two values."""
    y = np.asarray(y, dtype=float)
    if y.size < 2:
        return 0.0
    return float(np.var(y, ddof=1))


def _frozen(a, ndim: int) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix, response and per-column metadata.

    Instances are immutable; arrays are stored read-only and every operation
    returns a new ``Dataset``. ``row_ids``/``source`` carry row provenance
    when it is known (loaded files), which lets callers detect train/test
    overlap.
    """

    X: np.ndarray
    y: np.ndarray
    feature_meta: tuple[FeatureMeta, ...] = None
    sigma2_eps: float | None = None
    row_ids: np.ndarray | None = None
    source: str | None = None
    sigma2_y_hat: float = field(init=False)

    def __post_init__(self):
        X = _frozen(self.X, 2)
        y = _frozen(self.y, 1)
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has length {y.shape[0]}")
        meta = self.feature_meta
        if meta is None:
            meta = tuple(FeatureMeta(f"x{j + 1}") for j in range(X.shape[1]))
        meta = tuple(meta)
        if len(meta) != X.shape[1]:
            raise ValueError(f"feature_meta has {len(meta)} entries for {X.shape[1]} columns")
        if self.sigma2_eps is not None and not self.sigma2_eps >= 0:
            raise ValueError("sigma2_eps must be nonnegative")
        row_ids = self.row_ids
        if row_ids is not None:
            row_ids = np.array(row_ids, dtype=np.int64)
            if row_ids.shape != y.shape:
                raise ValueError("row_ids must have one entry per row")
            row_ids.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_meta", meta)
        object.__setattr__(self, "row_ids", row_ids)
        object.__setattr__(self, "sigma2_y_hat", sample_variance(y))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def feature_names(self) -> list[str]:
        return [m.name for m in self.feature_meta]

    def continuous_original(self) -> list[int]:
        """Indices of continuous columns that came from the source data."""
        return [
            j for j, m in enumerate(self.feature_meta)
            if m.kind == "continuous" and m.origin == "original"
        ]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            self.X[rows], self.y[rows], self.feature_meta, self.sigma2_eps,
            None if self.row_ids is None else self.row_ids[rows], self.source,
        )

    def with_response(self, y) -> "Dataset":
        return Dataset(self.X, y, self.feature_meta, self.sigma2_eps, self.row_ids, self.source)

    def select_columns(self, cols: Sequence[int]) -> "Dataset":
        cols = list(cols)
        return replace(self, X=self.X[:, cols], feature_meta=tuple(self.feature_meta[j] for j in cols))


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    train_index: np.ndarray
    test_index: np.ndarray


def _parse_float(cell: str, row: int, col: str) -> float:
    text = cell.strip()
    if text == "":
        raise FormatError(f"missing value at row {row}, column {col!r}")
    try:
        value = float(text)
    except ValueError:
        raise FormatError(f"non-numeric value {cell!r} at row {row}, column {col!r}") from None
    if math.isnan(value):
        raise FormatError(f"NaN at row {row}, column {col!r}")
    return value


def _is_numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(
    path,
    response_column: str,
    categorical_policy: Literal["one-hot", "reject"] = "one-hot",
) -> Dataset:
    """Read a headed CSV file into a ``Dataset``.

    Columns whose cells are not all numeric are treated as categorical; they
    are expanded into 0/1 indicator columns (levels in sorted order) under the
    ``one-hot`` policy and rejected otherwise. Row numbers in error messages
    are 1-based data rows (the header is row 0).
    """
    if categorical_policy not in ("one-hot", "reject"):
        raise ValueError(f"unknown categorical_policy {categorical_policy!r}")
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if len(set(header)) != len(header):
        raise FormatError(f"{path}: duplicate column names in header")
    if response_column not in header:
        raise FormatError(f"{path}: response column {response_column!r} not in header")
    if not body:
        raise FormatError(f"{path}: no data rows")
    for i, r in enumerate(body, start=1):
        if len(r) != len(header):
            raise FormatError(f"{path}: row {i} has {len(r)} cells, header has {len(header)}")

    columns = {name: [r[j] for r in body] for j, name in enumerate(header)}
    y = np.array([_parse_float(c, i, response_column)
                  for i, c in enumerate(columns[response_column], start=1)])

    blocks: list[np.ndarray] = []
    meta: list[FeatureMeta] = []
    for name in header:
        if name == response_column:
            continue
        cells = columns[name]
        for i, c in enumerate(cells, start=1):
            if c.strip() == "":
                raise FormatError(f"{path}: missing value at row {i}, column {name!r}")
        if all(_is_numeric(c) for c in cells):
            blocks.append(np.array([_parse_float(c, i, name) for i, c in enumerate(cells, start=1)]))
            meta.append(FeatureMeta(name, "continuous"))
            continue
        if categorical_policy == "reject":
            raise PolicyError(f"{path}: column {name!r} is categorical and policy is 'reject'")
        values = [c.strip() for c in cells]
        for level in sorted(set(values)):
            blocks.append(np.array([1.0 if v == level else 0.0 for v in values]))
            meta.append(FeatureMeta(f"{name}={level}", "categorical-encoded"))

    X = np.column_stack(blocks) if blocks else np.empty((len(body), 0))
    return Dataset(X, y, tuple(meta), None, np.arange(len(body)), str(path.resolve()))


def write_csv(data: Dataset, path, response_column: str = "y") -> None:
    """Write ``data`` in the same dialect ``load_csv`` reads (floats via repr)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.feature_names + [response_column])
        for xi, yi in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def split(data: Dataset, test_fraction: float, seed: int) -> SplitPair:
    """Uniformly random train/test partition; ``round(n * test_fraction)`` rows go to test."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    n = data.n
    if n < 2:
        raise ValueError("need at least two rows to split")
    n_test = int(round(n * test_fraction))
    if n_test == 0 or n_test == n:
        raise ValueError(f"test_fraction={test_fraction} leaves an empty side for n={n}")
    perm = rng(seed, "split").permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return SplitPair(data.take(train_idx), data.take(test_idx), train_idx, test_idx)


def inject_response_noise(data: Dataset, proportion: float, seed: int) -> Dataset:
    """Add N(0, proportion * var(y)) noise to the response, variance taken from the input."""
    if not proportion >= 0:
        raise ValueError(f"proportion must be nonnegative, got {proportion}")
    if proportion == 0:
        return data.with_response(data.y)
    sd = math.sqrt(proportion * data.sigma2_y_hat)
    eps = rng(seed, "response-noise").standard_normal(data.n) * sd
    return data.with_response(data.y + eps)


def kfold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Random near-equal partition of ``range(n)`` into ``folds`` test blocks."""
    if folds < 2 or folds > n:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    perm = rng(seed, "kfold").permutation(n)
    return [np.sort(block) for block in np.array_split(perm, folds)]
