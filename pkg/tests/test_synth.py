import inspect

import numpy as np
import pytest
from hypothesis import given, strategies as st

from augbagg import synth
from augbagg.dataset import Dataset, FeatureMeta
from augbagg.synth import (
    LinearModelSpec, NoiseSpec, RidgeMatched, augment_with_noise, calibrate_noise_variance,
    generate_linear_data, make_covariance, noise_columns, sparse_ones_beta, resolve_targets,
)

# beta = 1_5 under AR(1) rho=0.35: 5 + 2 * (4*0.35 + 3*0.35^2 + 2*0.35^3 + 0.35^4)
SIGNAL_035 = 5 + 2 * (4 * 0.35 + 3 * 0.35**2 + 2 * 0.35**3 + 0.35**4)


def test_covariance_examples():
    np.testing.assert_array_equal(make_covariance(2, 0.0), np.eye(2))
    assert make_covariance(3, 0.35)[0, 2] == pytest.approx(0.1225, abs=1e-15)
    np.linalg.cholesky(make_covariance(5, 0.35))


@given(st.integers(1, 30), st.floats(0, 0.99))
def test_covariance_structure(p, rho):
    S = make_covariance(p, rho)
    np.testing.assert_array_equal(S, S.T)
    np.testing.assert_array_equal(np.diag(S), 1.0)
    np.linalg.cholesky(S)


def test_calibration():
    assert calibrate_noise_variance(np.ones(5), np.eye(5), 1.0) == pytest.approx(5.0, abs=1e-12)
    assert SIGNAL_035 == pytest.approx(8.7365125, abs=1e-12)
    got = calibrate_noise_variance(np.ones(5), make_covariance(5, 0.35), 0.01)
    assert got == pytest.approx(873.65125, rel=1e-12)
    with pytest.raises(ValueError):
        calibrate_noise_variance(np.zeros(5), np.eye(5), 1.0)


def test_generate_linear_data():
    spec = LinearModelSpec(100, 5, np.ones(5), 0.35, 0.01)
    d = generate_linear_data(spec, 3)
    assert (d.n, d.p) == (100, 5)
    assert d.sigma2_eps == pytest.approx(873.65125, rel=1e-12)
    again = generate_linear_data(spec, 3)
    assert np.array_equal(d.X, again.X) and np.array_equal(d.y, again.y)


def test_high_snr_limit():
    spec = LinearModelSpec(10000, 5, np.ones(5), 0.35, 1e12)
    d = generate_linear_data(spec, 0)
    assert np.corrcoef(d.y, d.X @ np.ones(5))[0, 1] > 0.999


def test_design_covariance_monte_carlo():
    d = generate_linear_data(LinearModelSpec(20000, 4, np.ones(4), 0.5, 1.0), 1)
    np.testing.assert_allclose(np.cov(d.X.T), make_covariance(4, 0.5), atol=0.04)


def test_sparse_ones_beta():
    np.testing.assert_array_equal(sparse_ones_beta(6, 2), [1, 1, 0, 0, 0, 0])


def test_spec_validation():
    with pytest.raises(ValueError):
        LinearModelSpec(10, 3, np.ones(2))
    with pytest.raises(ValueError):
        LinearModelSpec(10, 2, np.ones(2), snr=0)
    with pytest.raises(ValueError):
        NoiseSpec(q=3, r=0.5, variance_rule=RidgeMatched(1.0))
    with pytest.raises(ValueError):
        NoiseSpec(q=2, r=1.5)
    with pytest.raises(ValueError):
        NoiseSpec(q=2, r=0.5, target_assignment=(0,))


def _data(n, p, seed=0):
    g = np.random.default_rng(seed)
    return Dataset(g.standard_normal((n, p)), g.standard_normal(n))


def test_independent_unit_noise():
    d = _data(50, 4)
    aug = augment_with_noise(d, NoiseSpec(q=3), 1)
    assert aug.data.p == 7
    np.testing.assert_array_equal(aug.data.X[:, :4], d.X)
    np.testing.assert_array_equal(aug.data.y, d.y)
    assert [m.origin for m in aug.data.feature_meta] == ["original"] * 4 + ["noise"] * 3
    assert aug.spec.target_assignment == "independent"


def test_correlation_law():
    d = _data(10000, 5, 2)
    aug = augment_with_noise(d, NoiseSpec(q=250, r=0.99), 4)
    targets = aug.spec.target_assignment
    assert len(targets) == 250 and set(targets) <= set(range(5))
    N = aug.noise_columns
    for j, t in enumerate(targets):
        assert abs(np.corrcoef(N[:, j], d.X[:, t])[0, 1] - 0.99) < 0.02


@pytest.mark.parametrize("r", [-0.7, 0.0, 0.4, 0.9])
def test_noise_has_unit_variance(r):
    d = _data(20000, 3, 5)
    N = augment_with_noise(d, NoiseSpec(q=6, r=r), 6).noise_columns
    np.testing.assert_allclose(N.var(axis=0), 1.0, atol=0.05)


def test_ridge_matched_variance():
    d = _data(10000, 3)
    N = augment_with_noise(d, NoiseSpec(q=16, variance_rule=RidgeMatched(4.0)), 0).noise_columns
    assert np.all(np.abs(N.var(axis=0, ddof=1) / 0.25 - 1) < 0.2)


def test_targets_only_continuous_originals():
    g = np.random.default_rng(0)
    meta = (FeatureMeta("a"), FeatureMeta("b=1", "categorical-encoded"), FeatureMeta("c"))
    d = Dataset(g.standard_normal((30, 3)), g.standard_normal(30), meta)
    spec = augment_with_noise(d, NoiseSpec(q=40, r=0.5), 1).spec
    assert set(spec.target_assignment) <= {0, 2}
    with pytest.raises(ValueError):
        resolve_targets(NoiseSpec(q=2, r=0.5, target_assignment=(1, 1)), [0, 2], 0)
    with pytest.raises(ValueError):
        resolve_targets(NoiseSpec(q=2, r=0.5), [], 0)


def test_noise_column_depends_only_on_seed_and_index():
    X = _data(40, 3).X
    five = noise_columns(X, NoiseSpec(q=5, target_assignment="independent"), 9)
    two = noise_columns(X, NoiseSpec(q=2, target_assignment="independent"), 9)
    np.testing.assert_array_equal(five[:, :2], two)


def test_noise_generation_never_sees_response():
    # structurally: only X is passed; and changing y leaves the block unchanged
    assert "y" not in inspect.signature(noise_columns).parameters
    d = _data(30, 3)
    spec = NoiseSpec(q=4, r=0.6)
    a = augment_with_noise(d, spec, 2)
    b = augment_with_noise(d.with_response(d.y * 100 + 7), spec, 2)
    np.testing.assert_array_equal(a.noise_columns, b.noise_columns)
    assert a.spec == b.spec


def test_reseeding_noise_leaves_original_block():
    d = _data(30, 3)
    a = augment_with_noise(d, NoiseSpec(q=4), 1).data
    b = augment_with_noise(d, NoiseSpec(q=4), 2).data
    np.testing.assert_array_equal(a.X[:, :3], b.X[:, :3])
    np.testing.assert_array_equal(a.y, b.y)
    assert not np.array_equal(a.X[:, 3:], b.X[:, 3:])


def test_theta():
    assert NoiseSpec(q=10).theta(5) == 2.0
    assert synth.NoiseSpec(q=0).theta(5) == 0.0
