"""Minimum-norm least squares, ridge, and their noise-augmented and ensembled variants.

Everything here fits through the origin (no intercept); center the data
beforehand if an intercept is wanted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import kfold_indices
from .rng import derive_seed, rng


@dataclass(frozen=True, eq=False)
class LinearFit:
    coefficients: np.ndarray
    method: str
    metadata: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.coefficients.shape[0]:
            raise ValueError(
                f"X has {X.shape[-1]} columns, fit has {self.coefficients.shape[0]} coefficients"
            )
        return X @ self.coefficients


@dataclass(frozen=True)
class SubsampleSpec:
    """Column fraction ``alpha``, row fraction ``eta`` and ensemble size ``B``."""

    alpha: float
    eta: float
    B: int

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.B < 1:
            raise ValueError(f"B must be positive, got {self.B}")

    def sizes(self, n: int, p: int) -> tuple[int, int]:
        """``(|S_b|, |T_b|)`` = ``(floor(alpha p), floor(eta n))``."""
        # the epsilon keeps exact ratios like k/p from flooring to k - 1
        k, m = math.floor(self.alpha * p + 1e-9), math.floor(self.eta * n + 1e-9)
        if k < 1:
            raise ValueError(f"alpha={self.alpha} selects no columns out of p={p}")
        return k, m

    def check(self, n: int, p: int) -> tuple[int, int]:
        k, m = self.sizes(n, p)
        if not k < m - 1:
            raise ValueError(
                f"subset sizes must satisfy |S_b| < |T_b| - 1, got "
                f"|S_b|={k}, |T_b|={m} (alpha={self.alpha}, eta={self.eta}, n={n}, p={p})"
            )
        return k, m


@dataclass(frozen=True)
class RiskReport:
    empirical_risk: float
    bias_limit: float
    variance_limit: float
    same_b_terms: bool


def pinv_cutoff(s: np.ndarray, shape: tuple[int, int]) -> float:
    if s.size == 0:
        return 0.0
    return max(shape) * np.finfo(float).eps * float(s[0])


def pinv(X) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD, dropping singular values below the cutoff."""
    X = np.asarray(X, dtype=float)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    keep = s > pinv_cutoff(s, X.shape)
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def _minnorm_coef(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    keep = s > pinv_cutoff(s, X.shape)
    return Vt[keep].T @ ((U[:, keep].T @ y) / s[keep])


def minnorm_ols(X, y) -> LinearFit:
    """Least-squares solution of smallest Euclidean norm, ``X^+ y``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"incompatible shapes X{X.shape}, y{y.shape}")
    return LinearFit(_minnorm_coef(X, y), "min-norm-ols")


def ridge(X, y, lam: float, form: str = "auto") -> LinearFit:
    """Closed-form ridge ``(X'X + lam I)^{-1} X'y``.

    ``form="dual"`` computes the algebraically identical ``X'(XX' + lam I)^{-1} y``,
    which is what ``auto`` uses when ``p > n``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if lam < 0:
        raise ValueError("negative ridge penalties are not supported")
    if lam == 0:
        if np.linalg.matrix_rank(X) < p:
            raise ValueError("lambda=0 with a rank-deficient design; use minnorm_ols instead")
        return LinearFit(_minnorm_coef(X, y), "ridge", {"lambda": 0.0})
    if form == "auto":
        form = "dual" if p > n else "primal"
    if form == "primal":
        coef = np.linalg.solve(X.T @ X + lam * np.eye(p), X.T @ y)
    elif form == "dual":
        coef = X.T @ np.linalg.solve(X @ X.T + lam * np.eye(n), y)
    else:
        raise ValueError(f"unknown form {form!r}")
    return LinearFit(coef, "ridge", {"lambda": float(lam)})


def ridge_path(X, y, lams) -> np.ndarray:
    """Ridge coefficients for every penalty in ``lams`` from one SVD; shape ``(len(lams), p)``."""
    X = np.asarray(X, dtype=float)
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    uty = U.T @ y
    lams = np.asarray(lams, dtype=float)
    shrink = s[None, :] / (s[None, :] ** 2 + lams[:, None])
    return (shrink * uty[None, :]) @ Vt


def _ridge_noise(n: int, q: int, lam: float, seed: int) -> np.ndarray:
    # one stream for the whole block: q runs to 1e5 here and per-column
    # streams (as in synth.noise_columns) would dominate the cost
    return rng(seed, "ridge-noise").standard_normal((n, q)) * math.sqrt(lam / q)


def augmented_minnorm(X, y, q: int, lam: float, truncate: bool = True, seed: int = 0) -> LinearFit:
    """Min-norm OLS on ``[X N]`` with ``q`` iid ``N(0, lam/q)`` columns ``N``.

    As ``q`` grows the first ``p`` coefficients approach ridge with penalty ``lam``.
    """
    if q < 1:
        raise ValueError(f"q must be positive, got {q}")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    N = _ridge_noise(X.shape[0], q, lam, derive_seed(seed, "aug-train"))
    coef = _minnorm_coef(np.hstack([X, N]), y)
    p = X.shape[1]
    meta = {"q": q, "lambda": float(lam), "truncated": truncate, "p": p}
    return LinearFit(coef[:p] if truncate else coef, "augmented", meta)


def predict_augmented(fit: LinearFit, x, lam: float, q: int, seed: int = 0) -> float | np.ndarray:
    """Prediction of the untruncated augmented model at ``x`` (vector or matrix),
    extending each point with ``q`` fresh ``N(0, lam/q)`` draws."""
    meta = fit.metadata
    if fit.method != "augmented" or meta.get("truncated", True):
        raise ValueError("predict_augmented needs an untruncated augmented fit")
    if meta["q"] != q or meta["lambda"] != lam:
        raise ValueError(f"fit was made with q={meta['q']}, lambda={meta['lambda']}")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    Xm = x[None, :] if single else x
    p = meta["p"]
    if Xm.shape[1] != p:
        raise ValueError(f"x has {Xm.shape[1]} entries, expected {p}")
    N = _ridge_noise(Xm.shape[0], q, lam, derive_seed(seed, "aug-predict"))
    out = Xm @ fit.coefficients[:p] + N @ fit.coefficients[p:]
    return float(out[0]) if single else out


def _draw_subsets(spec: SubsampleSpec, n: int, p: int, seed: int, b: int):
    k, m = spec.sizes(n, p)
    cols = np.sort(rng(seed, "columns", b).choice(p, size=k, replace=False))
    rows = np.sort(rng(seed, "rows", b).choice(n, size=m, replace=False))
    return cols, rows


def ols_subsample_ensemble(X, y, spec: SubsampleSpec, seed: int) -> LinearFit:
    """Average of min-norm OLS fits on random ``floor(eta n) x floor(alpha p)`` submatrices.

    Coefficients of unselected columns are zero in each member.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    spec.check(n, p)
    total = np.zeros(p)
    counts = np.zeros(p)
    for b in range(spec.B):
        cols, rows = _draw_subsets(spec, n, p, seed, b)
        total[cols] += _minnorm_coef(X[np.ix_(rows, cols)], y[rows])
        counts[cols] += 1
    return LinearFit(total / spec.B, "subsample-ensemble",
                     {"alpha": spec.alpha, "eta": spec.eta, "B": spec.B,
                      "inclusion": counts / spec.B})


def ensemble_risk(fit: LinearFit | np.ndarray, beta, sigma) -> float:
    """``<beta - b, Sigma (beta - b)>`` for the fitted coefficients ``b``."""
    coef = fit.coefficients if isinstance(fit, LinearFit) else np.asarray(fit, dtype=float)
    beta = np.asarray(beta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if coef.shape != beta.shape or sigma.shape != (beta.size, beta.size):
        raise ValueError(f"shape mismatch: coef {coef.shape}, beta {beta.shape}, sigma {sigma.shape}")
    d = beta - coef
    return float(d @ sigma @ d)


def _check_poles(alpha, gamma, eta, same_model):
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if same_model:
        if not eta > alpha * gamma:
            raise ValueError(f"pole: need eta > alpha*gamma, got eta={eta}, alpha*gamma={alpha * gamma}")
    elif not alpha * alpha * gamma < 1:
        raise ValueError(f"pole: need alpha^2*gamma < 1, got {alpha * alpha * gamma}")


def asymptotic_bias(alpha: float, gamma: float, eta: float, same_model: bool) -> float:
    """Almost-sure limit of the bias cross-term (``same_model``: b = c)."""
    _check_poles(alpha, gamma, eta, same_model)
    if same_model:
        return (1 - alpha) * (1 + alpha * gamma / (eta - alpha * gamma))
    a2g = alpha * alpha * gamma
    return (1 - alpha) ** 2 * (1 + a2g / (1 - a2g))


def asymptotic_variance(alpha: float, gamma: float, eta: float, sigma2: float, same_model: bool) -> float:
    """Almost-sure limit of the variance cross-term (``same_model``: b = c)."""
    _check_poles(alpha, gamma, eta, same_model)
    if same_model:
        return sigma2 * alpha * gamma / (eta - alpha * gamma)
    a2g = alpha * alpha * gamma
    return sigma2 * a2g / (1 - a2g)


def augmented_rate(alpha: float, theta: float) -> float:
    """Column-sampling rate seen by the original features after adding ``theta p`` noise columns."""
    if theta < 0:
        raise ValueError(f"theta must be nonnegative, got {theta}")
    return alpha / (1 + theta)


def asymptotic_risk(alpha, gamma, eta, sigma2, B: int | None = None) -> float:
    """Limit risk of a ``B``-member ensemble (``B=None``: infinitely many members).

    Combines the ``B`` diagonal and ``B(B-1)`` off-diagonal terms of the
    ``1/B^2`` double sum.
    """
    off = asymptotic_bias(alpha, gamma, eta, False) + asymptotic_variance(alpha, gamma, eta, sigma2, False)
    if B is None:
        return off
    same = asymptotic_bias(alpha, gamma, eta, True) + asymptotic_variance(alpha, gamma, eta, sigma2, True)
    return (same + (B - 1) * off) / B


def risk_report(fit: LinearFit | np.ndarray, beta, alpha: float, gamma: float, eta: float,
                sigma2: float, B: int | None = None) -> RiskReport:
    """Empirical risk under identity covariance next to the combined limits.

    ``same_b_terms`` is True when ``B == 1`` (only b = c terms); otherwise
    the limits mix diagonal and off-diagonal terms as in ``asymptotic_risk``.
    """
    beta = np.asarray(beta, dtype=float)
    emp = ensemble_risk(fit, beta, np.eye(beta.size))
    same = B == 1
    if same:
        bias = asymptotic_bias(alpha, gamma, eta, True)
        var = asymptotic_variance(alpha, gamma, eta, sigma2, True)
    else:
        w = 0.0 if B is None else 1.0 / B
        bias = w * asymptotic_bias(alpha, gamma, eta, True) + (1 - w) * asymptotic_bias(alpha, gamma, eta, False)
        var = (w * asymptotic_variance(alpha, gamma, eta, sigma2, True)
               + (1 - w) * asymptotic_variance(alpha, gamma, eta, sigma2, False))
    return RiskReport(emp, bias, var, same)


def subsample_risk_terms(X, beta, sigma2: float, spec: SubsampleSpec, seed: int,
                         cross_pairs: bool = False) -> dict:
    """Monte Carlo means of the bias/variance terms of a subsampled OLS ensemble.

    Assumes identity feature covariance. For each member ``b`` with operator
    ``A_b = S_b (T_b' X S_b)^+ T_b'``:

    * same-member bias ``||(I - A_b X) beta||^2`` and variance ``sigma2 ||A_b||_F^2``;
    * with ``cross_pairs``, the cross terms for consecutive pairs ``(b, b+1)``.

    Solves through the Gram matrix of each submatrix (full column rank is
    guaranteed almost surely by the size condition on Gaussian designs).
    """
    X = np.asarray(X, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n, p = X.shape
    spec.check(n, p)
    full_rows = spec.sizes(n, p)[1] == n
    G_full = X.T @ X if full_rows else None
    Xb_full = X @ beta

    bias_same, var_same, bias_cross, var_cross = [], [], [], []
    prev = None
    for b in range(spec.B):
        cols, rows = _draw_subsets(spec, n, p, seed, b)
        if full_rows:
            G = G_full[np.ix_(cols, cols)]
            rhs = X[:, cols].T @ Xb_full
        else:
            Xs = X[np.ix_(rows, cols)]
            G = Xs.T @ Xs
            rhs = Xs.T @ Xb_full[rows]
        Ginv = np.linalg.inv(G)
        fitted = np.zeros(p)
        fitted[cols] = Ginv @ rhs
        resid = beta - fitted
        bias_same.append(resid @ resid)
        var_same.append(sigma2 * np.trace(Ginv))
        if cross_pairs and prev is not None:
            pcols, prows, pGinv, presid = prev
            bias_cross.append(resid @ presid)
            # <A_b, A_c>_F restricted to shared rows, through the Gram blocks
            common_rows = np.intersect1d(rows, prows) if not full_rows else None
            if full_rows:
                M = G_full[np.ix_(cols, pcols)]
            else:
                M = X[np.ix_(common_rows, cols)].T @ X[np.ix_(common_rows, pcols)]
            prod = Ginv @ M @ pGinv
            shared, ia, ib = np.intersect1d(cols, pcols, return_indices=True)
            var_cross.append(sigma2 * float(np.sum(prod[ia, ib])))
        prev = (cols, rows, Ginv, resid)

    out = {
        "bias_same": float(np.mean(bias_same)),
        "var_same": float(np.mean(var_same)),
    }
    if cross_pairs:
        out["bias_cross"] = float(np.mean(bias_cross))
        out["var_cross"] = float(np.mean(var_cross))
    return out


def effective_penalty(lam: float, eta: float) -> float:
    """``lambda_q = (1 + lam - eta) / eta`` for the identity-design subsampled ensemble."""
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    return ((1 - eta) + lam) / eta


def simple_case_shrinkage(lam: float, eta: float) -> float:
    """Limit shrinkage ``eta / (1 + lam) = 1 / (1 + lambda_q)`` of the identity-design ensemble."""
    return 1.0 / (1.0 + effective_penalty(lam, eta))


def augmented_subsample_ensemble(X, y, eta: float, B: int, lam: float, seed: int,
                                 q: int | None = None) -> LinearFit:
    """Average over ``B`` row subsamples of the augmented min-norm estimator.

    ``q=None`` uses its ``q -> infinity`` limit, ridge with penalty ``lam``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    m = math.floor(eta * n)
    if m < 1:
        raise ValueError(f"eta={eta} selects no rows out of n={n}")
    total = np.zeros(p)
    for b in range(B):
        rows = np.sort(rng(seed, "rows", b).choice(n, size=m, replace=False))
        if q is None:
            total += ridge(X[rows], y[rows], lam).coefficients
        else:
            total += augmented_minnorm(X[rows], y[rows], q, lam, True, derive_seed(seed, "member", b)).coefficients
    return LinearFit(total / B, "subsample-ensemble",
                     {"eta": eta, "B": B, "lambda": lam, "q": q})


def cv_ridge_lambda(X, y, lams, folds: int, seed: int) -> float:
    """Penalty from ``lams`` minimising k-fold cross-validated squared error."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    lams = np.asarray(lams, dtype=float)
    err = np.zeros(lams.size)
    for test_rows in kfold_indices(X.shape[0], folds, seed):
        mask = np.ones(X.shape[0], dtype=bool)
        mask[test_rows] = False
        coefs = ridge_path(X[mask], y[mask], lams)
        err += np.sum((y[test_rows][None, :] - coefs @ X[test_rows].T) ** 2, axis=1)
    return float(lams[int(np.argmin(err))])


def randfs_ensemble(X, y, mtry: int, depth: int, B: int, seed: int):
    """Randomized forward selection, averaged over ``B`` runs.

    Each run adds ``depth`` features one at a time; at every step only
    ``mtry`` randomly drawn not-yet-included features are eligible and the
    one giving the lowest residual sum of squares (after an OLS refit) is
    added. Returns the averaged fit and the inclusion proportions.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if not 1 <= mtry <= p:
        raise ValueError(f"mtry must lie in [1, {p}], got {mtry}")
    if not 1 <= depth <= p:
        raise ValueError(f"depth must lie in [1, {p}], got {depth}")
    total = np.zeros(p)
    included = np.zeros(p)
    for b in range(B):
        gen = rng(seed, "randfs", b)
        chosen: list[int] = []
        remaining = list(range(p))
        coef = np.zeros(0)
        for _ in range(depth):
            k = min(mtry, len(remaining))
            cands = sorted(gen.choice(remaining, size=k, replace=False).tolist())
            best = None
            for j in cands:
                c = _minnorm_coef(X[:, chosen + [j]], y)
                rss = float(np.sum((y - X[:, chosen + [j]] @ c) ** 2))
                if best is None or rss < best[0]:
                    best = (rss, j, c)
            chosen.append(best[1])
            remaining.remove(best[1])
            coef = best[2]
        total[chosen] += coef
        included[chosen] += 1
    gamma = included / B
    return LinearFit(total / B, "randfs", {"mtry": mtry, "depth": depth, "B": B}), gamma
