"""Drop/replace tests of feature importance for bagged tree ensembles.

Two ensembles are bagged: one on the full design, one on a design where the
tested columns are dropped or replaced. Each is scored on its own
independent test set and the difference of test MSEs is referred to a normal
distribution; the test is one-sided (the tested columns matter when the
modified model is worse).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy import special, stats

from .dataset import Dataset, FeatureMeta
from .ensemble import fit_bagging, predict_ensemble, squared_errors
from .rng import derive_seed, rng
from .synth import (
    LinearModelSpec, NoiseSpec, augment_with_noise, generate_linear_data, noise_columns,
    sparse_ones_beta, resolve_targets,
)
from .tree import TreeConfig

GeneratorKind = Literal["independent", "correlated", "permutation"]


@dataclass(frozen=True)
class Replacement:
    """How substitute columns are drawn in a replacement test."""

    kind: GeneratorKind = "permutation"
    r: float = 0.0

    def __post_init__(self):
        if self.kind not in ("independent", "correlated", "permutation"):
            raise ValueError(f"unknown replacement kind {self.kind!r}")
        if self.kind == "correlated" and not -1 <= self.r <= 1:
            raise ValueError(f"r must lie in [-1, 1], got {self.r}")


@dataclass(frozen=True)
class ImportanceTestPlan:
    test_columns: tuple[int, ...]
    mode: Literal["drop", "replace"] = "replace"
    replacement: Replacement = field(default_factory=Replacement)
    B: int = 100
    tree_config: TreeConfig = field(default_factory=TreeConfig)
    alpha_level: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "test_columns", tuple(sorted(int(j) for j in self.test_columns)))
        if not self.test_columns:
            raise ValueError("the tested feature set is empty")
        if len(set(self.test_columns)) != len(self.test_columns):
            raise ValueError("duplicate tested columns")
        if self.mode not in ("drop", "replace"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0 < self.alpha_level < 1:
            raise ValueError(f"alpha_level must lie in (0, 1), got {self.alpha_level}")

    def partition(self, p: int) -> tuple[list[int], list[int]]:
        tested = list(self.test_columns)
        if tested[0] < 0 or tested[-1] >= p:
            raise ValueError(f"tested columns {tested} out of range for p={p}")
        return [j for j in range(p) if j not in set(tested)], tested


@dataclass(frozen=True)
class TestResult:
    T: float
    sigma2_hat: float
    z: float
    p_value: float
    reject: bool
    mse_full: float
    mse_modified: float
    n1: int
    n2: int


def normal_cdf(x: float) -> float:
    return float(special.ndtr(x))


def normal_quantile(u: float) -> float:
    return float(special.ndtri(u))


def mse_difference_test(sq_full, sq_modified, alpha_level: float = 0.05) -> TestResult:
    """One-sided z-test on ``T = mean(sq_full) - mean(sq_modified)``.

    Variance ``s1^2/n1 + s2^2/n2`` from the two samples of squared errors;
    rejects when ``z < -z_{1-alpha}`` (equivalently p-value below alpha).
    """
    a = np.asarray(sq_full, dtype=float)
    b = np.asarray(sq_modified, dtype=float)
    if a.size < 2 or b.size < 2:
        raise ValueError("each test set needs at least two observations")
    T = float(a.mean() - b.mean())
    s2 = float(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    if s2 > 0:
        z = T / math.sqrt(s2)
    else:
        z = 0.0 if T == 0 else math.copysign(math.inf, T)
    p_value = normal_cdf(z)
    return TestResult(T, s2, z, p_value, bool(p_value < alpha_level),
                      float(a.mean()), float(b.mean()), a.size, b.size)


def generate_replacement(X, test_indices: Sequence[int], replacement: Replacement, seed: int,
                         base_columns: Sequence[int] | None = None,
                         feature_meta: Sequence[FeatureMeta] | None = None) -> np.ndarray:
    """Substitutes for the columns ``test_indices`` of ``X`` (same shape as that block).

    ``correlated`` targets random continuous columns among ``base_columns``
    (default: every column not under test).
    """
    X = np.asarray(X, dtype=float)
    tested = list(test_indices)
    n, q = X.shape[0], len(tested)
    if replacement.kind == "permutation":
        out = np.empty((n, q))
        for k, j in enumerate(tested):
            out[:, k] = X[rng(seed, "permute", k).permutation(n), j]
        return out
    if replacement.kind == "independent":
        return noise_columns(X, NoiseSpec(q=q, target_assignment="independent"), seed)
    base = [j for j in range(X.shape[1]) if j not in set(tested)] if base_columns is None else list(base_columns)
    if feature_meta is not None:
        base = [j for j in base if feature_meta[j].kind == "continuous"]
    if not base:
        raise ValueError("correlated replacement needs at least one continuous base column")
    spec = resolve_targets(NoiseSpec(q=q, r=replacement.r), base, seed)
    return noise_columns(X, spec, seed)


def _modified_design(data: Dataset, plan: ImportanceTestPlan, seed: int, targets=None) -> np.ndarray:
    base, tested = plan.partition(data.p)
    if plan.mode == "drop":
        return data.X[:, base]
    X = data.X.copy()
    if plan.replacement.kind == "correlated" and targets is not None:
        spec = NoiseSpec(q=len(tested), r=plan.replacement.r, target_assignment=targets)
        X[:, tested] = noise_columns(data.X, spec, seed)
    else:
        X[:, tested] = generate_replacement(data.X, tested, plan.replacement, seed, base, data.feature_meta)
    return X


def _check_disjoint(train: Dataset, other: Dataset, name: str):
    if train.source is None or train.source != other.source:
        return
    if train.row_ids is None or other.row_ids is None:
        return
    if np.intersect1d(train.row_ids, other.row_ids).size:
        raise ValueError(f"{name} shares rows with the training set")


def run_importance_test(train: Dataset, test1: Dataset, test2: Dataset,
                        plan: ImportanceTestPlan, seed: int) -> TestResult:
    """Fit full and modified bagged ensembles and test whether the tested columns help."""
    for t, name in ((test1, "test1"), (test2, "test2")):
        if t.p != train.p:
            raise ValueError(f"{name} has {t.p} columns, train has {train.p}")
        _check_disjoint(train, t, name)
    base, tested = plan.partition(train.p)
    targets = None
    if plan.mode == "replace" and plan.replacement.kind == "correlated":
        cont = [j for j in base if train.feature_meta[j].kind == "continuous"]
        targets = resolve_targets(NoiseSpec(q=len(tested), r=plan.replacement.r), cont,
                                  derive_seed(seed, "replace-targets")).target_assignment

    X_star = _modified_design(train, plan, derive_seed(seed, "replace-train"), targets)
    X2_star = _modified_design(test2, plan, derive_seed(seed, "replace-test"), targets)
    full_cfg = TreeConfig(None, plan.tree_config.min_node_size, plan.tree_config.max_depth)

    full = fit_bagging(train, plan.B, full_cfg, derive_seed(seed, "ensemble-full"))
    modified = fit_bagging(Dataset(X_star, train.y), plan.B, full_cfg,
                           derive_seed(seed, "ensemble-modified"))
    sq1 = squared_errors(full, test1)
    sq2 = (test2.y - predict_ensemble(modified, X2_star)) ** 2
    return mse_difference_test(sq1, sq2, plan.alpha_level)


# --- simulation sweep ------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    """Linear-model signals plus ``q`` noise columns that are put under test."""

    snr: float
    q: int
    noise_r: float = 0.0
    p: int = 5
    rho: float = 0.35
    n_train: int = 500
    n_test: int = 1000


@dataclass(frozen=True)
class Combo:
    """``mode`` plus, for replacement, what the substitutes look like.

    ``replacement="same"`` draws substitutes from the exact law of the
    tested noise columns (fresh noise, freshly chosen targets).
    """

    mode: Literal["drop", "replace"]
    replacement: Literal["same", "independent", "correlated", "permutation"] | None = None
    replacement_r: float = 0.7

    @property
    def label(self) -> str:
        return self.mode if self.mode == "drop" else f"replace-{self.replacement}"


def simulate_scenario(sc: Scenario, seed: int) -> tuple[Dataset, Dataset, Dataset]:
    """Training set and two test sets with ``sc.q`` noise columns appended.

    Correlated noise targets are drawn once per replication and shared by
    the three sets, so all three follow the same joint law.
    """
    lin = LinearModelSpec(sc.n_train, sc.p, sparse_ones_beta(sc.p, sc.p), sc.rho, sc.snr)
    spec = resolve_targets(NoiseSpec(q=sc.q, r=sc.noise_r), list(range(sc.p)), derive_seed(seed, "targets"))
    out = []
    for k, n in enumerate((sc.n_train, sc.n_test, sc.n_test)):
        d = generate_linear_data(LinearModelSpec(n, lin.p, lin.beta, lin.rho, lin.snr),
                                 derive_seed(seed, "data", k))
        out.append(augment_with_noise(d, spec, derive_seed(seed, "noise", k)).data)
    return tuple(out)


def _same_law_design(data: Dataset, sc: Scenario, seed: int) -> np.ndarray:
    # fresh noise block from the scenario's own generating law
    p = sc.p
    spec = resolve_targets(NoiseSpec(q=sc.q, r=sc.noise_r), list(range(p)), derive_seed(seed, "targets"))
    X = data.X.copy()
    X[:, p:] = noise_columns(data.X[:, :p], spec, derive_seed(seed, "noise"))
    return X


def scenario_test(sc: Scenario, combo: Combo, B: int, tree_config: TreeConfig,
                  alpha_level: float, seed: int) -> TestResult:
    """One replication of generate -> fit -> test for a simulated scenario."""
    train, test1, test2 = simulate_scenario(sc, derive_seed(seed, "simulate"))
    tested = tuple(range(sc.p, sc.p + sc.q))
    if combo.mode == "drop" or combo.replacement != "same":
        if combo.mode == "drop":
            rep = Replacement()
        elif combo.replacement == "correlated":
            rep = Replacement("correlated", combo.replacement_r)
        else:
            rep = Replacement(combo.replacement)
        plan = ImportanceTestPlan(tested, combo.mode, rep, B, tree_config, alpha_level)
        return run_importance_test(train, test1, test2, plan, derive_seed(seed, "test"))
    # same-law substitutes: the modified design redraws the noise block itself
    cfg = TreeConfig(None, tree_config.min_node_size, tree_config.max_depth)
    full = fit_bagging(train, B, cfg, derive_seed(seed, "ensemble-full"))
    rs = derive_seed(seed, "same-law")
    X_star = _same_law_design(train, sc, rs)
    X2_star = _same_law_design(test2, sc, derive_seed(rs, "test"))
    modified = fit_bagging(Dataset(X_star, train.y), B, cfg, derive_seed(seed, "ensemble-modified"))
    sq1 = squared_errors(full, test1)
    sq2 = (test2.y - predict_ensemble(modified, X2_star)) ** 2
    return mse_difference_test(sq1, sq2, alpha_level)


def binomial_acceptance_interval(reps: int, p0: float = 0.05, level: float = 0.99) -> tuple[int, int]:
    """Central range of rejection counts holding at least ``level`` probability under ``p0``."""
    tail = (1 - level) / 2
    dist = stats.binom(reps, p0)
    return int(dist.ppf(tail)), int(dist.ppf(1 - tail))


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def rejection_rate_sweep(snr_grid, q_grid, noise_r: float, combos: Sequence[Combo], reps: int,
                         seed: int, B: int = 100, tree_config: TreeConfig | None = None,
                         alpha_level: float = 0.05, scenario_kwargs: dict | None = None,
                         raw_rows: list | None = None) -> list[dict]:
    """Rejection proportions over an SNR x q x combo grid.

    Cell ``(i, j, k)`` replication ``rep`` uses seed ``(seed, i, j, k, rep)``,
    so cells do not share random numbers. Per-replication details are
    appended to ``raw_rows`` when a list is supplied.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    tree_config = tree_config or TreeConfig()
    scenario_kwargs = scenario_kwargs or {}
    table = []
    for i, snr in enumerate(snr_grid):
        for j, q in enumerate(q_grid):
            sc = Scenario(snr=snr, q=q, noise_r=noise_r, **scenario_kwargs)
            for k, combo in enumerate(combos):
                rejections = 0
                for rep in range(reps):
                    res = scenario_test(sc, combo, B, tree_config, alpha_level,
                                        derive_seed(seed, i, j, k, rep))
                    rejections += res.reject
                    if raw_rows is not None:
                        raw_rows.append(dict(snr=snr, q=q, mode=combo.label, rep=rep, T=res.T,
                                             sigma2_hat=res.sigma2_hat, z=res.z,
                                             p_value=res.p_value, reject=int(res.reject)))
                lo, hi = clopper_pearson(rejections, reps)
                table.append(dict(snr=snr, q=q, mode=combo.mode,
                                  replacement=combo.replacement or "none", reps=reps,
                                  rejections=rejections, proportion=rejections / reps,
                                  binomial_ci_low=lo, binomial_ci_high=hi))
    return table
