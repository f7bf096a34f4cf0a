"""Bagging, random forests and augmented bagging (AugBagg) over CART trees."""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .dataset import Dataset, kfold_indices
from .rng import derive_seed, rng
from .synth import NoiseSpec, RidgeMatched, augment_with_noise, noise_columns
from .tree import PresortedDesign, RegressionTree, TreeConfig

FORMAT_NAME = "augbagg-ensemble"
FORMAT_VERSION = 1

R_GRID = (0.0, 0.1, 0.4, 0.7, 0.9)


@dataclass(frozen=True, eq=False)
class BaggedEnsemble:
    trees: tuple[RegressionTree, ...]
    tree_config: TreeConfig
    bootstrap: bool
    feature_count_at_fit: int
    noise_spec: NoiseSpec | None = None
    original_p: int | None = None

    def __post_init__(self):
        if not self.trees:
            raise ValueError("an ensemble needs at least one tree")
        if any(t.n_features != self.feature_count_at_fit for t in self.trees):
            raise ValueError("all trees must share feature_count_at_fit")
        if self.original_p is None:
            object.__setattr__(self, "original_p", self.feature_count_at_fit)

    @property
    def B(self) -> int:
        return len(self.trees)


@dataclass(frozen=True)
class ErrorReport:
    test_mse: float
    n_test: int
    relative_test_error: float | None = None


def fit_bagging(
    train: Dataset, B: int, config: TreeConfig, seed: int, bootstrap: bool = True,
) -> BaggedEnsemble:
    """Average of ``B`` trees, tree ``b`` grown on bootstrap sample ``(seed, b)``.

    ``config.mtry`` equal to the feature count gives classical bagging; a
    smaller value gives a random forest.
    """
    if B < 1:
        raise ValueError(f"B must be positive, got {B}")
    config.resolve_mtry(train.p)
    design = PresortedDesign(train.X, train.y)
    n = train.n
    trees = []
    for b in range(B):
        if bootstrap:
            draw = rng(seed, "bootstrap", b).integers(0, n, size=n)
            counts = np.bincount(draw, minlength=n)
        else:
            counts = np.ones(n, dtype=np.int64)
        trees.append(design.fit(counts, config, derive_seed(seed, "tree", b)))
    return BaggedEnsemble(tuple(trees), config, bootstrap, train.p)


def fit_augbagg(
    train: Dataset, spec: NoiseSpec, B: int, config: TreeConfig, seed: int,
    bootstrap: bool = True,
) -> BaggedEnsemble:
    """Bagging (all features eligible at every split) on ``train`` plus ``spec.q`` noise columns."""
    aug = augment_with_noise(train, spec, derive_seed(seed, "augment"))
    cfg = replace(config, mtry=aug.data.p)
    model = fit_bagging(aug.data, B, cfg, seed, bootstrap)
    return replace(model, noise_spec=aug.spec, original_p=train.p)


def predict_ensemble(model: BaggedEnsemble, X_test, seed: int = 0) -> np.ndarray:
    """Mean tree prediction per row.

    For an AugBagg model ``X_test`` may hold only the original columns; the
    noise columns are then drawn once from the recorded ``NoiseSpec`` (same
    target features as in training) and shared by every tree.
    """
    X = np.asarray(X_test, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X_test must be a matrix, got shape {X.shape}")
    if X.shape[1] != model.feature_count_at_fit:
        if model.noise_spec is None or X.shape[1] != model.original_p:
            raise ValueError(
                f"X_test has {X.shape[1]} columns; expected {model.feature_count_at_fit}"
                + ("" if model.noise_spec is None else f" or {model.original_p}")
            )
        X = np.hstack([X, noise_columns(X, model.noise_spec, derive_seed(seed, "predict-noise"))])
    X = np.ascontiguousarray(X)
    total = np.zeros(X.shape[0])
    for tree in model.trees:
        total += tree.predict(X)
    return total / model.B


def tree_predictions(model: BaggedEnsemble, X) -> np.ndarray:
    """``(B, n)`` matrix of individual tree outputs (full-width ``X`` only)."""
    X = np.ascontiguousarray(X, dtype=float)
    return np.stack([t.predict(X) for t in model.trees])


def squared_errors(model: BaggedEnsemble, test: Dataset, seed: int = 0) -> np.ndarray:
    return (test.y - predict_ensemble(model, test.X, seed)) ** 2


def error_report(model: BaggedEnsemble, test: Dataset, seed: int = 0) -> ErrorReport:
    mse = float(np.mean(squared_errors(model, test, seed)))
    rel = None if test.sigma2_eps is None else mse / test.sigma2_eps
    return ErrorReport(mse, test.n, rel)


def rte_vs_bagging(err_bagging: float, err_augbagg: float, sigma2_y_hat: float) -> float:
    """Percentage improvement of AugBagg over bagging, scaled by the response variance."""
    if not sigma2_y_hat > 0:
        raise ValueError(f"sigma2_y_hat must be positive, got {sigma2_y_hat}")
    return (err_bagging - err_augbagg) / sigma2_y_hat * 100.0


def q_grid(p: int) -> list[int]:
    """``p/2, p, 3p/2, 2p`` rounded half up (at least 1)."""
    return [max(1, int(np.floor(k * p / 2 + 0.5))) for k in (1, 2, 3, 4)]


def tune_augbagg(
    train: Dataset, B: int, config: TreeConfig, folds: int, seed: int,
    r_grid=R_GRID,
) -> NoiseSpec:
    """Cross-validated choice of ``(q, r)``; ties go to smaller ``q`` then smaller ``r``.

    Correlated candidates are skipped when the data has no continuous
    original feature to correlate with.
    """
    if folds < 2:
        raise ValueError(f"folds must be at least 2, got {folds}")
    rs = sorted(r_grid)
    if not train.continuous_original():
        rs = [r for r in rs if r == 0]
        if not rs:
            raise ValueError("no continuous features and no r = 0 candidate")
    blocks = kfold_indices(train.n, folds, derive_seed(seed, "tune-folds"))
    all_rows = np.arange(train.n)
    best: tuple[float, int, float] | None = None
    for q, r in itertools.product(q_grid(train.p), rs):
        spec = NoiseSpec(q=q, r=r)
        sse = 0.0
        for k, test_rows in enumerate(blocks):
            fit_rows = np.setdiff1d(all_rows, test_rows)
            model = fit_augbagg(train.take(fit_rows), spec, B, config, derive_seed(seed, "tune", k))
            held = train.take(test_rows)
            sse += float(np.sum(squared_errors(model, held, derive_seed(seed, "tune-pred", k))))
        cand = (sse / train.n, q, r)
        if best is None or cand < best:
            best = cand
    return NoiseSpec(q=best[1], r=best[2])


# --- serialization -------------------------------------------------------
# One .npz archive: a JSON header (format name/version, configs, noise spec)
# plus the concatenated node arrays of all trees and their offsets.

def _spec_to_dict(spec: NoiseSpec | None):
    if spec is None:
        return None
    rule = spec.variance_rule
    return {
        "q": spec.q,
        "r": spec.r,
        "variance_rule": "unit" if rule == "unit" else {"ridge_matched": rule.lam},
        "target_assignment": (
            spec.target_assignment if spec.target_assignment in (None, "independent")
            else list(spec.target_assignment)
        ),
    }


def _spec_from_dict(d):
    if d is None:
        return None
    rule = d["variance_rule"]
    ta = d["target_assignment"]
    return NoiseSpec(
        q=d["q"], r=d["r"],
        variance_rule="unit" if rule == "unit" else RidgeMatched(rule["ridge_matched"]),
        target_assignment=ta if ta in (None, "independent") else tuple(ta),
    )


_NODE_FIELDS = ("feature", "threshold", "left", "right", "value", "count")


def save_ensemble(model: BaggedEnsemble, path) -> None:
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "tree_config": asdict(model.tree_config),
        "bootstrap": model.bootstrap,
        "feature_count_at_fit": model.feature_count_at_fit,
        "original_p": model.original_p,
        "noise_spec": _spec_to_dict(model.noise_spec),
        "tree_configs": [asdict(t.config) for t in model.trees],
        "rng_seeds": [t.rng_seed for t in model.trees],
    }
    sizes = np.array([t.n_nodes for t in model.trees], dtype=np.int64)
    arrays = {f: np.concatenate([getattr(t, f) for t in model.trees]) for f in _NODE_FIELDS}
    with Path(path).open("wb") as fh:
        np.savez(fh, header=np.frombuffer(json.dumps(header).encode(), dtype=np.uint8),
                 sizes=sizes, **arrays)


def load_ensemble(path) -> BaggedEnsemble:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(z["header"].tobytes().decode())
        if header.get("format") != FORMAT_NAME:
            raise ValueError(f"{path}: not an {FORMAT_NAME} file")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {header.get('version')}")
        bounds = np.concatenate([[0], np.cumsum(z["sizes"])])
        cols = {f: z[f] for f in _NODE_FIELDS}
    p = header["feature_count_at_fit"]
    trees = []
    for k, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        parts = {f: cols[f][a:b].copy() for f in _NODE_FIELDS}
        for arr in parts.values():
            arr.setflags(write=False)
        trees.append(RegressionTree(
            **parts, config=TreeConfig(**header["tree_configs"][k]),
            n_features=p, rng_seed=header["rng_seeds"][k],
        ))
    return BaggedEnsemble(
        tuple(trees), TreeConfig(**header["tree_config"]), header["bootstrap"], p,
        _spec_from_dict(header["noise_spec"]), header["original_p"],
    )
