"""Experiment runners behind the CLI.

Each experiment is a list of independent jobs (one per grid cell and
replication, seeded from ``(seed, cell, rep)``) whose result rows are
concatenated in job order, so the raw CSV is the same for any worker count.
"""
from __future__ import annotations

import csv
import functools
import hashlib
import json
import logging
import math
import platform
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .config import ExperimentConfig, params_dict
from .dataset import inject_response_noise, load_csv, split
from .ensemble import error_report, fit_augbagg, fit_bagging, rte_vs_bagging, tune_augbagg
from .linear import (
    asymptotic_bias, asymptotic_variance, augmented_minnorm, cv_ridge_lambda, minnorm_ols,
    predict_augmented, ridge, SubsampleSpec, subsample_risk_terms,
)
from .plotting import line_chart
from .rng import derive_seed, rng
from .synth import LinearModelSpec, NoiseSpec, generate_linear_data, sparse_ones_beta, resolve_targets
from .tree import TreeConfig
from .vartest import Combo, Scenario, clopper_pearson, scenario_test

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"


# --- CSV helpers -------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def write_rows(path: Path, rows: list[dict], columns: Sequence[str] | None = None) -> Path:
    if columns is None:
        columns = list(rows[0]) if rows else []
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])
    return path


def aggregate(rows: list[dict], keys: Sequence[str], values: Sequence[str]) -> list[dict]:
    """Group by ``keys`` (first-appearance order); mean and sd (n - 1) of each value column."""
    groups: OrderedDict[tuple, list[dict]] = OrderedDict()
    for r in rows:
        groups.setdefault(tuple(r[k] for k in keys), []).append(r)
    out = []
    for key, members in groups.items():
        rec = dict(zip(keys, key))
        rec["count"] = len(members)
        for v in values:
            arr = np.array([float(m[v]) for m in members], dtype=float)
            rec[f"mean_{v}"] = float(np.mean(arr))
            rec[f"sd_{v}"] = float(np.std(arr, ddof=1)) if arr.size > 1 else math.nan
        out.append(rec)
    return out


def _map(fn: Callable, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def _flatten(results: list[list[dict]]) -> list[dict]:
    return [row for rows in results for row in rows]


# --- AugBagg error curves (fig1 / fig2) ---------------------------------------

def _curve_job(job, prm, seed):
    i, rep = job
    snr = prm.snr_grid[i]
    beta = sparse_ones_beta(prm.p, prm.p)
    cell_seed = derive_seed(seed, "curve", i, rep)
    train = generate_linear_data(LinearModelSpec(prm.n, prm.p, beta, prm.rho, snr),
                                 derive_seed(cell_seed, "train"))
    test = generate_linear_data(LinearModelSpec(prm.n_test, prm.p, beta, prm.rho, snr),
                                derive_seed(cell_seed, "test"))
    rows = []
    base = dict(snr=snr, rep=rep)
    for mtry in prm.mtry_grid:
        model = fit_bagging(train, prm.B, TreeConfig(mtry, prm.min_node_size),
                            derive_seed(cell_seed, "forest", mtry))
        rep_ = error_report(model, test)
        rows.append(dict(base, model="bagging" if mtry == prm.p else "forest", mtry=mtry, q=0,
                         r=0.0, test_mse=rep_.test_mse, relative_test_error=rep_.relative_test_error))
    for a, r in enumerate(prm.r_grid):
        for b, q in enumerate(prm.q_grid):
            spec = NoiseSpec(q=q, r=r)
            if r != 0:
                # targets drawn per replication, or once per (r, q) when not resampled
                tseed = derive_seed(cell_seed if prm.resample_targets else seed, "targets", a, b)
                spec = resolve_targets(spec, list(range(prm.p)), tseed)
            fseed = derive_seed(cell_seed, "augbagg", a, b)
            model = fit_augbagg(train, spec, prm.B, TreeConfig(None, prm.min_node_size), fseed)
            rep_ = error_report(model, test, fseed)
            rows.append(dict(base, model="augbagg", mtry=prm.p + q, q=q, r=r,
                             test_mse=rep_.test_mse, relative_test_error=rep_.relative_test_error))
    return rows


def run_curves(cfg: ExperimentConfig):
    prm = cfg.params
    jobs = [(i, rep) for i in range(len(prm.snr_grid)) for rep in range(prm.reps)]
    rows = _flatten(_map(functools.partial(_curve_job, prm=prm, seed=cfg.seed), jobs, cfg.workers))
    agg = aggregate(rows, ["snr", "model", "mtry", "q", "r"], ["relative_test_error", "test_mse"])
    return rows, agg, {}


def plot_curves(cfg, agg, out: Path) -> list[Path]:
    paths = []
    for snr in cfg.params.snr_grid:
        cell = [a for a in agg if a["snr"] == snr]
        series = OrderedDict()
        for a in cell:
            if a["model"] == "augbagg":
                series.setdefault(f"AB(q, {a['r']:g})", []).append(
                    (a["q"], a["mean_relative_test_error"], _nz(a["sd_relative_test_error"])))
        hlines = [(f"{a['model']} mtry={a['mtry']}", a["mean_relative_test_error"])
                  for a in cell if a["model"] != "augbagg"]
        paths.append(line_chart(series, out / f"curves_snr_{snr:g}.svg", xlabel="q",
                                ylabel="relative test error", title=f"SNR = {snr:g}", hlines=hlines))
    return paths


def _nz(v):
    return 0.0 if v is None or (isinstance(v, float) and math.isnan(v)) else v


# --- real data RTE --------------------------------------------------------------

@functools.lru_cache(maxsize=4)
def _load(path: str, response: str, policy: str):
    return load_csv(path, response, policy)


def _realdata_job(job, prm, seed, data_path):
    k, rep = job
    data = _load(data_path, prm.response_column, prm.categorical_policy)
    prop = prm.noise_proportions[k]
    cell_seed = derive_seed(seed, "real", k, rep)
    noisy = inject_response_noise(data, prop, derive_seed(cell_seed, "inject"))
    pair = split(noisy, prm.test_fraction, derive_seed(cell_seed, "split"))
    cfg = TreeConfig(None, prm.min_node_size)
    bag = fit_bagging(pair.train, prm.B, cfg, derive_seed(cell_seed, "bagging"))
    err_bag = error_report(bag, pair.test).test_mse
    spec = tune_augbagg(pair.train, prm.B, cfg, prm.folds, derive_seed(cell_seed, "tune"), prm.r_grid)
    aseed = derive_seed(cell_seed, "augbagg")
    ab = fit_augbagg(pair.train, spec, prm.B, cfg, aseed)
    err_ab = error_report(ab, pair.test, aseed).test_mse
    return [dict(noise_proportion=prop, rep=rep, q=spec.q, r=spec.r, err_bagging=err_bag,
                 err_augbagg=err_ab, sigma2_y_hat=data.sigma2_y_hat,
                 rte=rte_vs_bagging(err_bag, err_ab, data.sigma2_y_hat))]


def _data_path(cfg) -> str:
    p = Path(cfg.params.data_path)
    if not p.is_absolute():
        p = cfg.base_dir / p
    if not p.exists():
        raise FileNotFoundError(f"data file not found: {p}")
    return str(p.resolve())


def run_realdata(cfg: ExperimentConfig):
    prm = cfg.params
    path = _data_path(cfg)
    _load(path, prm.response_column, prm.categorical_policy)  # fail fast on format errors
    jobs = [(k, rep) for k in range(len(prm.noise_proportions)) for rep in range(prm.reps)]
    fn = functools.partial(_realdata_job, prm=prm, seed=cfg.seed, data_path=path)
    rows = _flatten(_map(fn, jobs, cfg.workers))
    agg = aggregate(rows, ["noise_proportion"], ["rte", "err_bagging", "err_augbagg"])
    return rows, agg, {}


def plot_realdata(cfg, agg, out: Path) -> list[Path]:
    series = OrderedDict(RTE=[(a["noise_proportion"], a["mean_rte"], _nz(a["sd_rte"])) for a in agg])
    return [line_chart(series, out / "rte.svg", xlabel="injected noise proportion",
                       ylabel="RTE (%)", hlines=[("bagging", 0.0)])]


# --- ridge equivalence ------------------------------------------------------------

def _ridge_model(prm, snr):
    return LinearModelSpec(prm.n, prm.p, sparse_ones_beta(prm.p, prm.s), prm.rho, snr)


def _lambda_job(job, prm, seed):
    i, k = job
    spec = _ridge_model(prm, prm.snr_grid[i])
    data = generate_linear_data(spec, derive_seed(seed, "cv-data", i, k))
    lam = cv_ridge_lambda(data.X, data.y, prm.lambda_grid, prm.cv_folds, derive_seed(seed, "cv-folds", i, k))
    return [dict(snr=prm.snr_grid[i], dataset=k, lambda_cv=lam)]


def _ridge_job(job, prm, seed, lam_opt):
    i, rep = job
    snr = prm.snr_grid[i]
    lam = lam_opt[i]
    spec = _ridge_model(prm, snr)
    test_spec = LinearModelSpec(prm.n_test, spec.p, spec.beta, spec.rho, snr)
    rows = []

    def record(model, q, pred, test):
        mse = float(np.mean((test.y - pred) ** 2))
        rows.append(dict(snr=snr, rep=rep, model=model, q=q, lambda_opt=lam, test_mse=mse,
                         relative_test_error=mse / test.sigma2_eps))

    base_seed = derive_seed(seed, "ridge-base", i, rep)
    train = generate_linear_data(spec, derive_seed(base_seed, "train"))
    test = generate_linear_data(test_spec, derive_seed(base_seed, "test"))
    record("ridge", 0, test.X @ ridge(train.X, train.y, lam).coefficients, test)
    record("min-norm-ols", 0, test.X @ minnorm_ols(train.X, train.y).coefficients, test)
    for j, q in enumerate(prm.q_grid):
        cs = derive_seed(seed, "ridge-aug", i, j, rep)
        train = generate_linear_data(spec, derive_seed(cs, "train"))
        test = generate_linear_data(test_spec, derive_seed(cs, "test"))
        fit = augmented_minnorm(train.X, train.y, q, lam, truncate=False, seed=derive_seed(cs, "fit"))
        record("augmented", q, predict_augmented(fit, test.X, lam, q, derive_seed(cs, "predict")), test)
    return rows


def run_ridge_equivalence(cfg: ExperimentConfig):
    prm = cfg.params
    cv_jobs = [(i, k) for i in range(len(prm.snr_grid)) for k in range(prm.cv_datasets)]
    cv_rows = _flatten(_map(functools.partial(_lambda_job, prm=prm, seed=cfg.seed), cv_jobs, cfg.workers))
    lam_opt = [float(np.median([r["lambda_cv"] for r in cv_rows if r["snr"] == snr]))
               for snr in prm.snr_grid]
    jobs = [(i, rep) for i in range(len(prm.snr_grid)) for rep in range(prm.reps)]
    fn = functools.partial(_ridge_job, prm=prm, seed=cfg.seed, lam_opt=lam_opt)
    rows = _flatten(_map(fn, jobs, cfg.workers))
    agg = aggregate(rows, ["snr", "model", "q", "lambda_opt"], ["relative_test_error", "test_mse"])
    return rows, agg, {"lambda_cv.csv": cv_rows}


def plot_ridge(cfg, agg, out: Path) -> list[Path]:
    series = OrderedDict()
    hlines = []
    for a in agg:
        if a["model"] == "augmented":
            series.setdefault(f"SNR={a['snr']:g}", []).append(
                (a["q"], a["mean_relative_test_error"], _nz(a["sd_relative_test_error"])))
        elif a["model"] == "ridge":
            hlines.append((f"ridge SNR={a['snr']:g}", a["mean_relative_test_error"]))
    return [line_chart(series, out / "augmented_linear.svg", xlabel="q", ylabel="relative test error",
                       logx=True, hlines=hlines)]


# --- OLS ensemble risk asymptotics ------------------------------------------------

def _risk_job(job, prm, seed):
    a, t, rep = job
    alpha, theta = prm.alpha_grid[a], prm.theta_grid[t]
    n = prm.n
    p = int(round(prm.gamma * n))
    q = int(round(theta * p))
    k = math.floor(alpha * p + 1e-9)
    cs = derive_seed(seed, "risk", a, t, rep)
    X = rng(cs, "design").standard_normal((n, p + q))
    beta = np.zeros(p + q)
    beta[:p] = 1.0 / math.sqrt(p)
    alpha_eff = k / (p + q)
    gamma_eff = (p + q) / n
    spec = SubsampleSpec(alpha_eff, prm.eta, prm.B)
    terms = subsample_risk_terms(X, beta, prm.sigma2, spec, derive_seed(cs, "subsets"), prm.cross_pairs)
    row = dict(alpha=alpha, theta=theta, rep=rep, alpha_eff=alpha_eff, gamma_eff=gamma_eff,
               bias_same=terms["bias_same"], var_same=terms["var_same"],
               bias_same_limit=asymptotic_bias(alpha_eff, gamma_eff, prm.eta, True),
               var_same_limit=asymptotic_variance(alpha_eff, gamma_eff, prm.eta, prm.sigma2, True))
    if prm.cross_pairs:
        row.update(bias_cross=terms["bias_cross"], var_cross=terms["var_cross"],
                   bias_cross_limit=asymptotic_bias(alpha_eff, gamma_eff, prm.eta, False),
                   var_cross_limit=asymptotic_variance(alpha_eff, gamma_eff, prm.eta, prm.sigma2, False))
    return [row]


def run_ols_risk(cfg: ExperimentConfig):
    prm = cfg.params
    jobs = [(a, t, rep) for a in range(len(prm.alpha_grid)) for t in range(len(prm.theta_grid))
            for rep in range(prm.reps)]
    rows = _flatten(_map(functools.partial(_risk_job, prm=prm, seed=cfg.seed), jobs, cfg.workers))
    values = ["bias_same", "var_same", "bias_same_limit", "var_same_limit"]
    if prm.cross_pairs:
        values += ["bias_cross", "var_cross", "bias_cross_limit", "var_cross_limit"]
    agg = aggregate(rows, ["alpha", "theta", "alpha_eff", "gamma_eff"], values)
    return rows, agg, {}


def plot_ols_risk(cfg, agg, out: Path) -> list[Path]:
    paths = []
    for theta in cfg.params.theta_grid:
        cell = [a for a in agg if a["theta"] == theta]
        series = OrderedDict()
        for term in ("bias_same", "var_same"):
            series[f"{term} (MC)"] = [(a["alpha"], a[f"mean_{term}"], _nz(a[f"sd_{term}"])) for a in cell]
            series[f"{term} (limit)"] = [(a["alpha"], a[f"mean_{term}_limit"], 0.0) for a in cell]
        paths.append(line_chart(series, out / f"risk_theta_{theta:g}.svg", xlabel="alpha",
                                ylabel="term value", title=f"theta = {theta:g}"))
    return paths


# --- importance-test rejection rates -----------------------------------------------

def _combo(d: dict) -> Combo:
    return Combo(d["mode"], d.get("replacement"), d.get("replacement_r", 0.7))


def _importance_job(job, prm, seed):
    i, j, k, rep = job
    sc = Scenario(prm.snr_grid[i], prm.q_grid[j], prm.noise_r, prm.p, prm.rho, prm.n_train, prm.n_test)
    combo = _combo(prm.combos[k])
    res = scenario_test(sc, combo, prm.B, TreeConfig(None, prm.min_node_size), prm.alpha_level,
                        derive_seed(seed, i, j, k, rep))
    return [dict(snr=sc.snr, q=sc.q, mode=combo.mode, replacement=combo.replacement or "none", rep=rep,
                 T=res.T, sigma2_hat=res.sigma2_hat, z=res.z, p_value=res.p_value,
                 reject=int(res.reject), mse_full=res.mse_full, mse_modified=res.mse_modified)]


REJECTION_COLUMNS = ["snr", "q", "mode", "replacement", "reps", "rejections", "proportion",
                     "binomial_ci_low", "binomial_ci_high"]


def rejection_table(rows: list[dict]) -> list[dict]:
    groups: OrderedDict[tuple, list[int]] = OrderedDict()
    for r in rows:
        groups.setdefault((r["snr"], r["q"], r["mode"], r["replacement"]), []).append(int(r["reject"]))
    out = []
    for (snr, q, mode, rep), flags in groups.items():
        k, n = sum(flags), len(flags)
        lo, hi = clopper_pearson(k, n)
        out.append(dict(snr=snr, q=q, mode=mode, replacement=rep, reps=n, rejections=k,
                        proportion=k / n, binomial_ci_low=lo, binomial_ci_high=hi))
    return out


def run_importance(cfg: ExperimentConfig):
    prm = cfg.params
    jobs = [(i, j, k, rep) for i in range(len(prm.snr_grid)) for j in range(len(prm.q_grid))
            for k in range(len(prm.combos)) for rep in range(prm.reps)]
    rows = _flatten(_map(functools.partial(_importance_job, prm=prm, seed=cfg.seed), jobs, cfg.workers))
    agg = aggregate(rows, ["snr", "q", "mode", "replacement"], ["reject", "T", "z"])
    return rows, agg, {"rejection_table.csv": rejection_table(rows)}


def plot_importance(cfg, agg, out: Path) -> list[Path]:
    paths = []
    for mode, rep in OrderedDict(((a["mode"], a["replacement"]), None) for a in agg):
        series = OrderedDict()
        for a in agg:
            if (a["mode"], a["replacement"]) == (mode, rep):
                series.setdefault(f"q={a['q']}", []).append((a["snr"], a["mean_reject"], 0.0))
        label = mode if mode == "drop" else f"replace-{rep}"
        paths.append(line_chart(series, out / f"rejection_{label}.svg", xlabel="SNR",
                                ylabel="rejection proportion", logx=True, title=label,
                                hlines=[("nominal", cfg.params.alpha_level)]))
    return paths


RUNNERS = {
    "fig1-augbagg-curves": (run_curves, plot_curves),
    "fig2-correlation-grid": (run_curves, plot_curves),
    "realdata-rte": (run_realdata, plot_realdata),
    "ridge-equivalence": (run_ridge_equivalence, plot_ridge),
    "ols-risk-asymptotics": (run_ols_risk, plot_ols_risk),
    "importance-rejection": (run_importance, plot_importance),
}


# --- driver ---------------------------------------------------------------------------

def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run ``cfg`` and write raw/aggregated CSVs, plots and a manifest into its output dir.

    Returns the manifest; its ``rerun_check`` entry compares the new file
    hashes with those of a previous manifest for the same config, if any.
    """
    run, plot = RUNNERS[cfg.experiment]
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    previous = None
    if (out / MANIFEST).exists():
        try:
            previous = json.loads((out / MANIFEST).read_text())
        except (OSError, ValueError):
            previous = None

    log.info("running %s (seed=%d) into %s", cfg.experiment, cfg.seed, out)
    rows, agg, extras = run(cfg)
    files = [write_rows(out / "raw.csv", rows), write_rows(out / "aggregated.csv", agg)]
    for name, extra_rows in extras.items():
        cols = REJECTION_COLUMNS if name == "rejection_table.csv" else None
        files.append(write_rows(out / name, extra_rows, cols))
    if cfg.plots:
        files.extend(plot(cfg, agg, out))

    manifest = {
        "format": "augbagg-manifest",
        "version": 1,
        "experiment": cfg.experiment,
        "config_sha256": cfg.source_sha256,
        "seed": cfg.seed,
        "full_scale": cfg.full,
        "params": params_dict(cfg.params),
        "software": {"augbagg": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "files": {f.name: sha256_file(f) for f in files},
    }
    if previous and previous.get("config_sha256") == cfg.source_sha256 and previous.get("files"):
        mismatched = sorted(name for name, h in manifest["files"].items()
                            if name in previous["files"] and previous["files"][name] != h)
        manifest["rerun_check"] = {"previous_found": True, "mismatched": mismatched}
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def verify_manifest(out_dir) -> list[str]:
    """Files whose current hash differs from the manifest (missing files included)."""
    out = Path(out_dir)
    manifest = json.loads((out / MANIFEST).read_text())
    bad = []
    for name, h in manifest["files"].items():
        f = out / name
        if not f.exists() or sha256_file(f) != h:
            bad.append(name)
    return bad
