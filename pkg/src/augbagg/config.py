"""Experiment configuration files.

Format (YAML, ``version: 1``)::

    version: 1
    experiment: fig1-augbagg-curves   # see EXPERIMENTS
    seed: 2020                        # required, nonnegative integer
    output_dir: results/fig1          # relative paths resolve against the config file
    workers: 1                        # optional; results do not depend on it
    plots: true                       # optional
    params:                           # optional; kind-specific overrides
      reps: 10

Every ``params`` key must be a field of the kind's parameter dataclass;
anything omitted takes the desk-scale default, or the full-scale default
when the runner is invoked with ``full=True``.
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError

CONFIG_VERSION = 1


@dataclass(frozen=True)
class CurveParams:
    """AugBagg error curves against bagging / forest baselines."""

    snr_grid: tuple[float, ...] = (0.01, 0.05, 0.09, 0.14)
    q_grid: tuple[int, ...] = (1, 10, 25, 50, 100, 250)
    r_grid: tuple[float, ...] = (0.0,)
    mtry_grid: tuple[int, ...] = (1, 2, 3, 4, 5)
    n: int = 100
    p: int = 5
    rho: float = 0.35
    n_test: int = 500
    reps: int = 50
    B: int = 100
    min_node_size: int = 5
    resample_targets: bool = True


@dataclass(frozen=True)
class RealDataParams:
    data_path: str = ""
    response_column: str = ""
    categorical_policy: str = "one-hot"
    noise_proportions: tuple[float, ...] = (0.0, 0.1, 0.25, 0.5)
    r_grid: tuple[float, ...] = (0.0, 0.1, 0.4, 0.7, 0.9)
    test_fraction: float = 0.2
    reps: int = 10
    B: int = 50
    folds: int = 3
    min_node_size: int = 5


@dataclass(frozen=True)
class RidgeEquivParams:
    n: int = 100
    p: int = 75
    s: int = 5
    rho: float = 0.35
    snr_grid: tuple[float, ...] = (0.05, 0.14, 0.71)
    q_grid: tuple[int, ...] = (10, 50, 200, 1000)
    cv_datasets: int = 20
    cv_folds: int = 10
    lambda_grid: tuple[float, ...] = tuple(float(10.0 ** (k / 10)) for k in range(-20, 41))
    reps: int = 100
    n_test: int = 100


@dataclass(frozen=True)
class OlsRiskParams:
    n: int = 1000
    gamma: float = 0.5
    eta: float = 1.0
    sigma2: float = 1.0
    alpha_grid: tuple[float, ...] = (0.25, 0.5, 0.75)
    theta_grid: tuple[float, ...] = (0.0, 1.0)
    B: int = 200
    reps: int = 5
    cross_pairs: bool = True


@dataclass(frozen=True)
class ImportanceParams:
    snr_grid: tuple[float, ...] = (0.01, 0.09, 0.71)
    q_grid: tuple[int, ...] = (10, 100)
    noise_r: float = 0.0
    combos: tuple[dict, ...] = ({"mode": "drop"}, {"mode": "replace", "replacement": "same"})
    reps: int = 50
    B: int = 100
    p: int = 5
    rho: float = 0.35
    n_train: int = 500
    n_test: int = 1000
    alpha_level: float = 0.05
    min_node_size: int = 5


EXPERIMENTS: dict[str, type] = {
    "fig1-augbagg-curves": CurveParams,
    "fig2-correlation-grid": CurveParams,
    "realdata-rte": RealDataParams,
    "ridge-equivalence": RidgeEquivParams,
    "ols-risk-asymptotics": OlsRiskParams,
    "importance-rejection": ImportanceParams,
}

# kind-specific defaults that differ from the parameter class defaults
_DESK: dict[str, dict[str, Any]] = {
    "fig2-correlation-grid": {
        "snr_grid": (0.01, 0.05, 0.09, 0.14, 0.42, 0.71, 1.22, 2.07),
        "r_grid": (0.0, 0.2, 0.7, 0.99),
        "reps": 20,
    },
}

_FULL: dict[str, dict[str, Any]] = {
    "fig1-augbagg-curves": {"reps": 500, "B": 500, "n_test": 1000,
                            "q_grid": (1, 5, 10, 25, 50, 75, 100, 150, 200, 250)},
    "fig2-correlation-grid": {"reps": 500, "B": 500, "n_test": 1000,
                              "q_grid": (1, 5, 10, 25, 50, 75, 100, 150, 200, 250)},
    "realdata-rte": {"reps": 50, "B": 500, "folds": 5},
    "ridge-equivalence": {"cv_datasets": 100, "snr_grid": (0.05, 0.09, 0.14, 0.42, 0.71, 1.22, 2.07)},
    "ols-risk-asymptotics": {"B": 2000, "reps": 20, "alpha_grid": (0.1, 0.25, 0.5, 0.75, 0.9)},
    "importance-rejection": {"reps": 500, "B": 500, "q_grid": (1, 10, 50, 100, 250),
                             "snr_grid": (0.01, 0.05, 0.09, 0.14, 0.42, 0.71, 1.22, 2.07)},
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    output_dir: Path
    params: Any
    workers: int = 1
    plots: bool = True
    source_sha256: str = ""
    version: int = CONFIG_VERSION
    full: bool = False
    base_dir: Path = field(default=Path("."))


def _coerce(value, ftype, path: str):
    text = str(ftype)
    if text.startswith("tuple"):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, "expected a list")
        if not value:
            raise ConfigError(path, "grid must be nonempty")
        inner = "float" if "float" in text else "int" if "int" in text else "dict"
        return tuple(_coerce(v, inner, f"{path}[{i}]") for i, v in enumerate(value))
    if ftype in ("float", float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if ftype in ("int", int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if ftype in ("bool", bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected true/false, got {value!r}")
        return value
    if ftype in ("str", str):
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if ftype == "dict":
        if not isinstance(value, dict):
            raise ConfigError(path, f"expected a mapping, got {value!r}")
        return dict(value)
    raise ConfigError(path, f"unsupported field type {ftype}")


def build_params(kind: str, overrides: dict, full: bool = False):
    cls = EXPERIMENTS[kind]
    values = dict(_DESK.get(kind, {}))
    if full:
        values.update(_FULL.get(kind, {}))
    known = {f.name: f for f in fields(cls)}
    for key, value in (overrides or {}).items():
        if key not in known:
            raise ConfigError(f"params.{key}", f"unknown parameter for {kind}")
        values[key] = _coerce(value, known[key].type, f"params.{key}")
    params = cls(**values)
    _check_params(kind, params)
    return params


def _check_params(kind: str, prm) -> None:
    def positive(name):
        if not getattr(prm, name) > 0:
            raise ConfigError(f"params.{name}", "must be positive")

    for name in ("reps", "B", "n", "p", "n_test", "n_train", "cv_datasets", "folds"):
        if hasattr(prm, name):
            positive(name)
    for name in ("snr_grid", "lambda_grid"):
        if hasattr(prm, name) and min(getattr(prm, name)) <= 0:
            raise ConfigError(f"params.{name}", "values must be positive")
    if hasattr(prm, "q_grid") and min(prm.q_grid) < 0:
        raise ConfigError("params.q_grid", "values must be nonnegative")
    if kind in ("fig1-augbagg-curves", "fig2-correlation-grid"):
        if max(prm.mtry_grid) > prm.p or min(prm.mtry_grid) < 1:
            raise ConfigError("params.mtry_grid", f"values must lie in [1, p={prm.p}]")
        if any(not -1 <= r <= 1 for r in prm.r_grid):
            raise ConfigError("params.r_grid", "correlations must lie in [-1, 1]")
        if not 0 <= prm.rho < 1:
            raise ConfigError("params.rho", "must lie in [0, 1)")
    if kind == "realdata-rte":
        if not prm.data_path:
            raise ConfigError("params.data_path", "required for realdata-rte")
        if not prm.response_column:
            raise ConfigError("params.response_column", "required for realdata-rte")
        if prm.categorical_policy not in ("one-hot", "reject"):
            raise ConfigError("params.categorical_policy", "must be 'one-hot' or 'reject'")
        if not 0 < prm.test_fraction < 1:
            raise ConfigError("params.test_fraction", "must lie in (0, 1)")
        if min(prm.noise_proportions) < 0:
            raise ConfigError("params.noise_proportions", "values must be nonnegative")
    if kind == "ridge-equivalence":
        if not 0 < prm.s <= prm.p:
            raise ConfigError("params.s", "must lie in [1, p]")
        if prm.cv_folds < 2:
            raise ConfigError("params.cv_folds", "must be at least 2")
    if kind == "ols-risk-asymptotics":
        if any(not 0 < a <= 1 for a in prm.alpha_grid):
            raise ConfigError("params.alpha_grid", "values must lie in (0, 1]")
        if not 0 < prm.eta <= 1:
            raise ConfigError("params.eta", "must lie in (0, 1]")
        if min(prm.theta_grid) < 0:
            raise ConfigError("params.theta_grid", "values must be nonnegative")
        for a in prm.alpha_grid:
            if not prm.eta > a * prm.gamma:
                raise ConfigError("params.alpha_grid", f"alpha={a} violates eta > alpha*gamma")
    if kind == "importance-rejection":
        for i, c in enumerate(prm.combos):
            if c.get("mode") not in ("drop", "replace"):
                raise ConfigError(f"params.combos[{i}].mode", "must be 'drop' or 'replace'")
            if c["mode"] == "replace" and c.get("replacement") not in (
                    "same", "independent", "correlated", "permutation"):
                raise ConfigError(f"params.combos[{i}].replacement",
                                  "must be same|independent|correlated|permutation")
            extra = set(c) - {"mode", "replacement", "replacement_r"}
            if extra:
                raise ConfigError(f"params.combos[{i}]", f"unknown keys {sorted(extra)}")
        if not 0 < prm.alpha_level < 1:
            raise ConfigError("params.alpha_level", "must lie in (0, 1)")


_TOP_KEYS = {"version", "experiment", "seed", "output_dir", "workers", "plots", "params"}


def parse_config(raw: dict, base_dir: Path = Path("."), full: bool = False,
                 source_sha256: str = "") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("", "config must be a mapping")
    extra = set(raw) - _TOP_KEYS
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown top-level key")
    version = raw.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError("version", f"unsupported config version {version!r}")
    kind = raw.get("experiment")
    if kind not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {sorted(EXPERIMENTS)}")
    if "seed" not in raw:
        raise ConfigError("seed", "required (no wall-clock default)")
    seed = raw["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a nonnegative integer")
    if "output_dir" not in raw or not isinstance(raw["output_dir"], str):
        raise ConfigError("output_dir", "required string")
    workers = raw.get("workers", 1)
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigError("workers", "must be a positive integer")
    plots = raw.get("plots", True)
    if not isinstance(plots, bool):
        raise ConfigError("plots", "must be true or false")
    overrides = raw.get("params") or {}
    if not isinstance(overrides, dict):
        raise ConfigError("params", "must be a mapping")
    params = build_params(kind, overrides, full)
    out = Path(raw["output_dir"])
    if not out.is_absolute():
        out = base_dir / out
    return ExperimentConfig(kind, seed, out, params, workers, plots, source_sha256,
                            version, full, base_dir)


def load_config(path, full: bool = False) -> ExperimentConfig:
    path = Path(path)
    data = path.read_bytes()
    try:
        raw = yaml.safe_load(data)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"YAML parse error: {exc}") from None
    return parse_config(raw, path.parent, full, hashlib.sha256(data).hexdigest())


def params_dict(params) -> dict:
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(params).items()}
