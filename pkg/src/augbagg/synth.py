"""Synthetic linear-model data and noise-feature augmentation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .dataset import Dataset, FeatureMeta
from .rng import rng


@dataclass(frozen=True, eq=False)
class LinearModelSpec:
    n: int
    p: int
    beta: np.ndarray
    rho: float = 0.35
    snr: float = 1.0

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if beta.shape != (self.p,):
            raise ValueError(f"beta must have length p={self.p}, got shape {beta.shape}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if not self.snr > 0:
            raise ValueError(f"snr must be positive, got {self.snr}")
        object.__setattr__(self, "beta", beta)


def sparse_ones_beta(p: int, s: int) -> np.ndarray:
    """First ``s`` coefficients equal to one, the rest zero."""
    beta = np.zeros(p)
    beta[:s] = 1.0
    return beta


@dataclass(frozen=True)
class RidgeMatched:
    """Noise columns with variance ``lam / q`` (the ridge-equivalent scaling)."""

    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"ridge-matched lambda must be positive, got {self.lam}")


@dataclass(frozen=True)
class NoiseSpec:
    """How the ``q`` augmentation columns are drawn.

    ``target_assignment`` is ``"independent"``, an explicit tuple of original
    column indices (one per noise column), or ``None`` meaning "pick a random
    continuous original feature per column at generation time". The spec
    returned inside an ``AugmentedDataset`` always has the targets resolved.
    """

    q: int
    r: float = 0.0
    variance_rule: Literal["unit"] | RidgeMatched = "unit"
    target_assignment: Literal["independent"] | tuple[int, ...] | None = None

    def __post_init__(self):
        if self.q < 0:
            raise ValueError(f"q must be nonnegative, got {self.q}")
        if not -1.0 <= self.r <= 1.0:
            raise ValueError(f"r must lie in [-1, 1], got {self.r}")
        if isinstance(self.variance_rule, RidgeMatched):
            if self.r != 0:
                raise ValueError("ridge-matched noise requires r = 0")
        elif self.variance_rule != "unit":
            raise ValueError(f"unknown variance_rule {self.variance_rule!r}")
        ta = self.target_assignment
        if ta is not None and ta != "independent":
            ta = tuple(int(t) for t in ta)
            if len(ta) != self.q:
                raise ValueError(f"target_assignment has {len(ta)} entries for q={self.q}")
            object.__setattr__(self, "target_assignment", ta)
        if ta == "independent" and self.r != 0:
            raise ValueError("correlated noise (r != 0) needs target features")

    @property
    def correlated(self) -> bool:
        return self.r != 0

    def theta(self, p: int) -> float:
        """Ratio q / p of added to original features."""
        return self.q / p


@dataclass(frozen=True)
class AugmentedDataset:
    data: Dataset
    spec: NoiseSpec
    original_p: int = field(default=0)

    @property
    def noise_columns(self) -> np.ndarray:
        return self.data.X[:, self.original_p:]


def make_covariance(p: int, rho: float) -> np.ndarray:
    """AR(1) correlation matrix with entries ``rho ** |i - j|``."""
    idx = np.arange(p)
    return np.power(float(rho), np.abs(idx[:, None] - idx[None, :]))


def calibrate_noise_variance(beta, sigma, snr: float) -> float:
    """Noise variance giving ``beta' sigma beta / sigma2 == snr``."""
    beta = np.asarray(beta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (beta.size, beta.size):
        raise ValueError(f"sigma shape {sigma.shape} does not match beta length {beta.size}")
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    signal = float(beta @ sigma @ beta)
    if not signal > 0:
        raise ValueError("beta' sigma beta must be positive to calibrate an SNR")
    return signal / snr


def sample_design(n: int, p: int, rho: float, gen: np.random.Generator) -> np.ndarray:
    chol = np.linalg.cholesky(make_covariance(p, rho))
    return gen.standard_normal((n, p)) @ chol.T


def generate_linear_data(spec: LinearModelSpec, seed: int) -> Dataset:
    """Draw ``X ~ N(0, Sigma(rho))`` rows and ``y = X beta + eps`` at the requested SNR."""
    sigma2 = calibrate_noise_variance(spec.beta, make_covariance(spec.p, spec.rho), spec.snr)
    X = sample_design(spec.n, spec.p, spec.rho, rng(seed, "design"))
    eps = rng(seed, "eps").standard_normal(spec.n) * math.sqrt(sigma2)
    return Dataset(X, X @ spec.beta + eps, sigma2_eps=sigma2)


def resolve_targets(spec: NoiseSpec, continuous: Sequence[int], seed: int) -> NoiseSpec:
    """Fix the per-column target features of ``spec`` (no-op when already fixed)."""
    continuous = list(continuous)
    ta = spec.target_assignment
    if ta == "independent":
        return spec
    if ta is None:
        if not spec.correlated or isinstance(spec.variance_rule, RidgeMatched):
            return replace(spec, target_assignment="independent")
        if not continuous:
            raise ValueError("correlated noise requested but there are no continuous original features")
        picks = rng(seed, "targets").integers(0, len(continuous), size=spec.q)
        return replace(spec, target_assignment=tuple(continuous[i] for i in picks))
    if spec.correlated:
        bad = [t for t in ta if t not in continuous]
        if bad:
            raise ValueError(f"noise targets {bad[:5]} are not continuous original features")
    return spec


def noise_columns(X: np.ndarray, spec: NoiseSpec, seed: int) -> np.ndarray:
    """The ``n x q`` block of augmentation columns for design ``X``.

    Takes only the design matrix: the response never enters noise generation.
    Column ``j`` depends only on ``(seed, j)`` and its target column. ``spec``
    must have resolved targets whenever ``r != 0``.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    out = np.empty((n, spec.q))
    if isinstance(spec.variance_rule, RidgeMatched):
        scale = math.sqrt(spec.variance_rule.lam / spec.q) if spec.q else 0.0
        for j in range(spec.q):
            out[:, j] = rng(seed, "noise", j).standard_normal(n) * scale
        return out
    ta = spec.target_assignment
    if spec.correlated and (ta is None or ta == "independent"):
        raise ValueError("correlated noise needs resolved target features")
    a, b = spec.r, math.sqrt(1.0 - spec.r * spec.r)
    for j in range(spec.q):
        z = rng(seed, "noise", j).standard_normal(n)
        out[:, j] = a * X[:, ta[j]] + b * z if spec.correlated else z
    return out


def augment_with_noise(data: Dataset, spec: NoiseSpec, seed: int) -> AugmentedDataset:
    """Append ``spec.q`` noise columns (tagged ``origin="noise"``) to ``data``."""
    resolved = resolve_targets(spec, data.continuous_original(), seed)
    N = noise_columns(data.X, resolved, seed)
    meta = data.feature_meta + tuple(
        FeatureMeta(f"noise{j + 1}", "continuous", "noise") for j in range(spec.q)
    )
    X = np.hstack([data.X, N]) if spec.q else data.X
    out = Dataset(X, data.y, meta, data.sigma2_eps, data.row_ids, data.source)
    return AugmentedDataset(out, resolved, data.p)
