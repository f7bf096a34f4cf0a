import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from augbagg import ensemble
from augbagg.dataset import Dataset, FeatureMeta
from augbagg.ensemble import (
    error_report, fit_augbagg, fit_bagging, load_ensemble, predict_ensemble, q_grid,
    rte_vs_bagging, save_ensemble, tree_predictions, tune_augbagg,
)
from augbagg.synth import LinearModelSpec, NoiseSpec, generate_linear_data
from augbagg.tree import TreeConfig, fit_tree


def _linear(n, snr, seed, p=5):
    return generate_linear_data(LinearModelSpec(n, p, np.ones(p), 0.35, snr), seed)


def _trees_equal(a, b):
    return all(np.array_equal(getattr(s, f), getattr(t, f))
               for s, t in zip(a.trees, b.trees)
               for f in ("feature", "threshold", "left", "right", "value", "count"))


def test_single_unbootstrapped_tree_is_cart():
    d = _linear(80, 1.0, 0)
    cfg = TreeConfig(min_node_size=3)
    model = fit_bagging(d, 1, cfg, 4, bootstrap=False)
    tree = fit_tree(d.X, d.y, cfg, 0)
    grid = np.random.default_rng(1).uniform(-3, 3, (500, 5))
    np.testing.assert_array_equal(predict_ensemble(model, grid), tree.predict(grid))


@given(st.integers(1, 8), st.integers(0, 10**6))
def test_prediction_is_mean_of_trees(B, seed):
    d = _linear(40, 0.5, seed % 1000)
    model = fit_bagging(d, B, TreeConfig(mtry=2), seed)
    X = np.random.default_rng(seed).standard_normal((7, 5))
    np.testing.assert_allclose(predict_ensemble(model, X), tree_predictions(model, X).mean(axis=0),
                               rtol=1e-12, atol=1e-12)


def test_single_row_mean():
    d = _linear(50, 0.5, 2)
    model = fit_bagging(d, 6, TreeConfig(), 1)
    x = d.X[:1] + 0.1
    assert predict_ensemble(model, x)[0] == pytest.approx(np.mean([t.predict(x)[0] for t in model.trees]))


def test_empty_augmentation_is_bagging():
    d = _linear(60, 0.5, 3)
    bag = fit_bagging(d, 5, TreeConfig(), 9)
    aug = fit_augbagg(d, NoiseSpec(q=0), 5, TreeConfig(), 9)
    assert _trees_equal(bag, aug)


def test_augbagg_uses_all_features():
    d = _linear(60, 0.5, 3)
    model = fit_augbagg(d, NoiseSpec(q=7), 3, TreeConfig(mtry=1), 0)
    assert model.feature_count_at_fit == 12 and model.original_p == 5
    assert model.tree_config.mtry == 12


def test_boundary_grid_point_reproducible():
    d = _linear(100, 0.5, 4)
    a = fit_augbagg(d, NoiseSpec(q=250, r=0.99), 5, TreeConfig(), 2)
    b = fit_augbagg(d, NoiseSpec(q=250, r=0.99), 5, TreeConfig(), 2)
    assert _trees_equal(a, b)
    assert a.noise_spec == b.noise_spec and len(a.noise_spec.target_assignment) == 250
    X = _linear(30, 0.5, 5).X
    np.testing.assert_array_equal(predict_ensemble(a, X, 3), predict_ensemble(b, X, 3))


def test_fit_depends_only_on_inputs():
    d = _linear(60, 0.5, 6)
    a = fit_bagging(d, 4, TreeConfig(mtry=2), 1)
    b = fit_bagging(Dataset(d.X.copy(), d.y.copy()), 4, TreeConfig(mtry=2), 1)
    assert _trees_equal(a, b)
    c = fit_bagging(d, 4, TreeConfig(mtry=2), 2)
    assert not _trees_equal(a, c)


def test_prediction_noise_reuses_targets_and_seed():
    d = _linear(100, 0.5, 7)
    model = fit_augbagg(d, NoiseSpec(q=10, r=0.7), 5, TreeConfig(), 1)
    X = _linear(20, 0.5, 8).X
    np.testing.assert_array_equal(predict_ensemble(model, X, 1), predict_ensemble(model, X, 1))
    assert not np.array_equal(predict_ensemble(model, X, 1), predict_ensemble(model, X, 2))
    with pytest.raises(ValueError):
        predict_ensemble(model, X[:, :4])


def test_prediction_seed_effect_is_small():
    diffs = []
    for k in range(20):
        train = _linear(100, 0.09, 100 + k)
        test = _linear(1000, 0.09, 200 + k)
        model = fit_augbagg(train, NoiseSpec(q=50), 100, TreeConfig(), k)
        a = error_report(model, test, 2 * k).test_mse
        b = error_report(model, test, 2 * k + 1).test_mse
        diffs.append(abs(a - b) / ((a + b) / 2))
    assert np.mean(diffs) < 0.05


def test_variance_decreases_with_B():
    d = _linear(100, 0.5, 9)
    x = np.zeros((1, 5))
    sds = []
    for B in (10, 100, 500):
        preds = [predict_ensemble(fit_bagging(d, B, TreeConfig(), s), x)[0] for s in range(20)]
        sds.append(np.var(preds, ddof=1))
    assert sds[0] >= sds[1] >= sds[2]


def test_error_report_contracts():
    g = np.random.default_rng(0)
    X = g.standard_normal((30, 2))
    d = Dataset(X, g.standard_normal(30))
    interp = fit_bagging(d, 2, TreeConfig(min_node_size=1), 0, bootstrap=False)
    rep = error_report(interp, d)
    assert rep.test_mse == 0.0 and rep.relative_test_error is None and rep.n_test == 30

    const = fit_bagging(Dataset(X, np.full(30, 2.0)), 3, TreeConfig(), 0)
    test = Dataset(g.standard_normal((200000, 2)), 2.0 + g.standard_normal(200000) * 1.5,
                   sigma2_eps=2.25)
    rep = error_report(const, test)
    assert rep.test_mse == pytest.approx(2.25, rel=0.02)
    assert rep.relative_test_error == pytest.approx(rep.test_mse / 2.25)


def test_rte():
    assert rte_vs_bagging(1.5, 1.5, 3.0) == 0.0
    assert rte_vs_bagging(2.0, 1.0, 4.0) == pytest.approx(25.0, abs=1e-12)
    with pytest.raises(ValueError):
        rte_vs_bagging(1.0, 1.0, 0.0)


def test_q_grid():
    assert q_grid(8) == [4, 8, 12, 16]
    assert q_grid(5) == [3, 5, 8, 10]
    assert q_grid(1) == [1, 1, 2, 2]


def test_tune_reproducible_on_pure_noise():
    g = np.random.default_rng(1)
    d = Dataset(g.standard_normal((60, 4)), g.standard_normal(60))
    a = tune_augbagg(d, 5, TreeConfig(), 3, 11, r_grid=(0.0, 0.7))
    b = tune_augbagg(d, 5, TreeConfig(), 3, 11, r_grid=(0.0, 0.7))
    assert a == b and a.q in q_grid(4) and a.r in (0.0, 0.7)


def test_tune_without_continuous_features(monkeypatch):
    g = np.random.default_rng(2)
    meta = tuple(FeatureMeta(f"c{j}", "categorical-encoded") for j in range(4))
    d = Dataset(g.integers(0, 2, (40, 4)).astype(float), g.standard_normal(40), meta)
    seen = []
    real = ensemble.fit_augbagg

    def spy(train, spec, *args, **kw):
        seen.append(spec.r)
        return real(train, spec, *args, **kw)

    monkeypatch.setattr(ensemble, "fit_augbagg", spy)
    spec = tune_augbagg(d, 3, TreeConfig(), 2, 0)
    assert spec.r == 0.0 and set(seen) == {0.0}
    assert len(seen) == 2 * len(q_grid(4))


@pytest.mark.parametrize("spec", [None, NoiseSpec(q=4), NoiseSpec(q=6, r=0.7)])
def test_serialization_round_trip(tmp_path, spec):
    d = _linear(80, 0.5, 10)
    cfg = TreeConfig(mtry=3, min_node_size=2, max_depth=6)
    model = fit_bagging(d, 4, cfg, 1) if spec is None else fit_augbagg(d, spec, 4, cfg, 1)
    path = tmp_path / "m.npz"
    save_ensemble(model, path)
    back = load_ensemble(path)
    assert _trees_equal(model, back)
    assert back.noise_spec == model.noise_spec and back.tree_config == model.tree_config
    assert back.original_p == model.original_p and back.bootstrap == model.bootstrap
    assert [t.rng_seed for t in back.trees] == [t.rng_seed for t in model.trees]
    X = _linear(25, 0.5, 11).X
    np.testing.assert_array_equal(predict_ensemble(back, X, 5), predict_ensemble(model, X, 5))


def test_load_rejects_other_versions(tmp_path):
    d = _linear(30, 0.5, 0)
    path = tmp_path / "m.npz"
    save_ensemble(fit_bagging(d, 1, TreeConfig(), 0), path)
    with np.load(path) as z:
        parts = dict(z)
    header = json.loads(parts["header"].tobytes())
    header["version"] = 99
    parts["header"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    np.savez(path, **parts)
    with pytest.raises(ValueError, match="version"):
        load_ensemble(path)
