import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp
from scipy import stats

from augbagg.dataset import Dataset, split
from augbagg.synth import LinearModelSpec, generate_linear_data
from augbagg.tree import TreeConfig
from augbagg.vartest import (
    Combo, ImportanceTestPlan, Replacement, Scenario, binomial_acceptance_interval, clopper_pearson,
    generate_replacement, mse_difference_test, normal_cdf, normal_quantile, rejection_rate_sweep,
    run_importance_test, scenario_test,
)

sq = hnp.arrays(float, st.integers(2, 30), elements=st.floats(0, 100, allow_nan=False))


def test_variance_formula():
    n = 1000
    d = math.sqrt((n - 1) / n)  # alternating +-d has unit sample variance
    a = 3 + d * (-1.0) ** np.arange(n)
    res = mse_difference_test(a, a + 0.5)
    assert res.sigma2_hat == pytest.approx(0.002, rel=1e-12)
    assert res.T == pytest.approx(-0.5)
    assert (res.n1, res.n2) == (n, n)


def test_self_comparison():
    a = np.random.default_rng(0).exponential(size=100)
    res = mse_difference_test(a, a)
    assert res.T == 0.0 and res.z == 0.0 and not res.reject
    assert res.p_value == 0.5


@given(sq, sq)
def test_antisymmetry(a, b):
    r1, r2 = mse_difference_test(a, b), mse_difference_test(b, a)
    assert r1.T == -r2.T
    assert r1.sigma2_hat == r2.sigma2_hat


@given(sq, sq, st.floats(0.001, 0.5))
def test_result_invariants(a, b, level):
    r = mse_difference_test(a, b, level)
    assert 0 <= r.p_value <= 1
    assert r.reject == (r.p_value < level)
    if np.ptp(a) > 0 or np.ptp(b) > 0:
        assert r.sigma2_hat > 0
        assert math.isfinite(r.z) and r.z == pytest.approx(r.T / math.sqrt(r.sigma2_hat))


def test_rejection_region_is_lower_tail():
    level = 0.05
    crit = normal_quantile(1 - level)
    base = np.tile([0.0, 2.0], 500)
    s = math.sqrt(mse_difference_test(base, base).sigma2_hat)
    below = mse_difference_test(base, base + (crit + 0.01) * s, level)
    above = mse_difference_test(base + (crit + 0.01) * s, base, level)
    assert below.reject and not above.reject


@pytest.mark.parametrize("x", [-8.0, -3.1, -1.6448536269514722, 0.0, 0.7, 2.5])
def test_normal_cdf_accuracy(x):
    assert normal_cdf(x) == pytest.approx(0.5 * math.erfc(-x / math.sqrt(2)), abs=1e-10, rel=1e-10)
    if 1e-8 < normal_cdf(x) < 1 - 1e-8:
        assert normal_quantile(normal_cdf(x)) == pytest.approx(x, abs=1e-9)


def test_replacement_generators():
    g = np.random.default_rng(1)
    X = g.standard_normal((10000, 4))
    perm = generate_replacement(X, [1, 3], Replacement("permutation"), 5)
    for k, j in enumerate([1, 3]):
        np.testing.assert_array_equal(np.sort(perm[:, k]), np.sort(X[:, j]))
        assert not np.array_equal(perm[:, k], X[:, j])
    corr = generate_replacement(X, [3], Replacement("correlated", 0.7), 6, base_columns=[0])
    assert abs(np.corrcoef(corr[:, 0], X[:, 0])[0, 1] - 0.7) < 0.03
    a = generate_replacement(X, [2, 3], Replacement("independent"), 7)
    np.testing.assert_array_equal(a, generate_replacement(X, [2, 3], Replacement("independent"), 7))
    assert a.shape == (10000, 2)


def test_plan_validation():
    plan = ImportanceTestPlan((3, 1))
    assert plan.partition(5) == ([0, 2, 4], [1, 3])
    with pytest.raises(ValueError):
        ImportanceTestPlan(())
    with pytest.raises(ValueError):
        ImportanceTestPlan((1,), alpha_level=1.0)
    with pytest.raises(ValueError):
        ImportanceTestPlan((5,)).partition(5)
    with pytest.raises(ValueError):
        Replacement("bogus")


def _three_sets(seed, n=300, p=4, snr=2.0):
    beta = np.array([2.0, 1.0, 0.0, 0.0])[:p]
    spec = LinearModelSpec(n, p, beta, 0.0, snr)
    return [generate_linear_data(spec, seed + k) for k in range(3)]


def test_signal_detected_and_noise_not():
    train, t1, t2 = _three_sets(0)
    cfg = TreeConfig(min_node_size=5)
    strong = run_importance_test(train, t1, t2, ImportanceTestPlan((0,), "drop", B=30, tree_config=cfg), 1)
    assert strong.reject and strong.T < 0
    noise = run_importance_test(train, t1, t2,
                                ImportanceTestPlan((3,), "replace", Replacement("independent"), B=30,
                                                   tree_config=cfg), 1)
    assert noise.p_value > 0.01


def test_adding_signal_to_tested_set_lowers_p_value():
    train, t1, t2 = _three_sets(10, snr=1.0)
    cfg = TreeConfig()
    for seed in range(3):
        only_noise = run_importance_test(train, t1, t2, ImportanceTestPlan((3,), "drop", B=20, tree_config=cfg), seed)
        with_signal = run_importance_test(train, t1, t2, ImportanceTestPlan((0, 3), "drop", B=20, tree_config=cfg), seed)
        assert with_signal.p_value <= only_noise.p_value


def test_shared_rows_rejected(tmp_path):
    path = tmp_path / "d.csv"
    g = np.random.default_rng(2)
    rows = "\n".join(",".join(f"{v:.5f}" for v in r) for r in g.standard_normal((40, 3)))
    path.write_text("a,b,y\n" + rows + "\n")
    from augbagg.dataset import load_csv
    d = load_csv(path, "y")
    s = split(d, 0.5, 0)
    plan = ImportanceTestPlan((1,), "drop", B=2)
    with pytest.raises(ValueError, match="shares rows"):
        run_importance_test(s.train, s.train.take([0, 1, 2]), s.test, plan, 0)
    run_importance_test(s.train, s.test, s.test, plan, 0)  # disjoint: fine


def test_binomial_interval_covers():
    lo, hi = binomial_acceptance_interval(200, 0.05, 0.99)
    dist = stats.binom(200, 0.05)
    assert dist.cdf(hi) - dist.cdf(lo - 1) >= 0.99
    assert lo <= 10 <= hi
    low, high = clopper_pearson(10, 200)
    assert low < 0.05 < high


def test_scenario_reproducible():
    sc = Scenario(0.5, 5, n_train=100, n_test=100)
    a = scenario_test(sc, Combo("replace", "same"), 5, TreeConfig(), 0.05, 3)
    b = scenario_test(sc, Combo("replace", "same"), 5, TreeConfig(), 0.05, 3)
    assert a == b
    c = scenario_test(sc, Combo("drop"), 5, TreeConfig(), 0.05, 3)
    assert c.T != a.T


def test_sweep_single_rep_is_indicator():
    raw = []
    table = rejection_rate_sweep([0.1, 1.0], [3], 0.0, [Combo("drop"), Combo("replace", "permutation")], 1, 0,
                                 B=3, scenario_kwargs=dict(n_train=60, n_test=60), raw_rows=raw)
    assert len(table) == 4 and len(raw) == 4
    for row in table:
        assert row["reps"] == 1 and row["proportion"] in (0.0, 1.0)
        assert set(row) == {"snr", "q", "mode", "replacement", "reps", "rejections", "proportion",
                            "binomial_ci_low", "binomial_ci_high"}
