import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from augbagg.dataset import (
    Dataset, inject_response_noise, kfold_indices, load_csv, sample_variance, split, write_csv,
)
from augbagg.errors import FormatError, PolicyError

finite = st.floats(-1e6, 1e6, allow_nan=False)


def _write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_three_rows(tmp_path):
    d = load_csv(_write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n7,8,9.5\n"), "y")
    assert (d.n, d.p) == (3, 2)
    assert d.feature_names == ["a", "b"]
    np.testing.assert_array_equal(d.y, [3, 6, 9.5])
    assert d.sigma2_eps is None
    assert all(m.origin == "original" for m in d.feature_meta)


def test_one_hot_categorical(tmp_path):
    d = load_csv(_write(tmp_path, "a,color,y\n1,red,0\n2,blue,1\n3,red,2\n"), "y", "one-hot")
    assert d.p == 3
    cat = [j for j, m in enumerate(d.feature_meta) if m.kind == "categorical-encoded"]
    assert len(cat) == 2
    np.testing.assert_array_equal(d.X[:, cat].sum(axis=1), 1.0)
    assert d.continuous_original() == [0]


def test_reject_policy(tmp_path):
    with pytest.raises(PolicyError):
        load_csv(_write(tmp_path, "a,color,y\n1,red,0\n2,blue,1\n"), "y", "reject")


@pytest.mark.parametrize("text, where", [
    ("a,y\n1,2\n2,abc\n", "row 2"),
    ("a,y\n1,2\nnan,3\n", "row 2"),
    ("a,y\n1,2\n,3\n", "row 2"),
    ("a,b\n1,2\n", "response"),
    ("a,y\n", "no data"),
])
def test_format_errors(tmp_path, text, where):
    with pytest.raises(FormatError, match=where):
        load_csv(_write(tmp_path, text), "y")


def test_csv_round_trip(tmp_path):
    g = np.random.default_rng(0)
    d = Dataset(g.standard_normal((7, 3)), g.standard_normal(7))
    path = tmp_path / "out.csv"
    write_csv(d, path)
    back = load_csv(path, "y")
    np.testing.assert_array_equal(back.X, d.X)
    np.testing.assert_array_equal(back.y, d.y)


def test_invariants_enforced():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(4))
    d = Dataset(np.zeros((3, 2)), np.array([1.0, 2.0, 4.0]))
    assert d.sigma2_y_hat == pytest.approx(np.var([1, 2, 4], ddof=1), rel=1e-12)
    with pytest.raises(ValueError):
        d.X[0, 0] = 1.0


@given(hnp.arrays(float, st.integers(2, 40), elements=finite))
def test_sigma2_y_hat_matches_recomputation(y):
    d = Dataset(np.zeros((y.size, 1)), y)
    ref = float(np.var(y, ddof=1))
    assert d.sigma2_y_hat == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_split_sizes_and_determinism():
    d = Dataset(np.arange(20.0).reshape(10, 2), np.arange(10.0))
    a = split(d, 0.2, 7)
    b = split(d, 0.2, 7)
    assert (a.train.n, a.test.n) == (8, 2)
    np.testing.assert_array_equal(a.test_index, b.test_index)
    np.testing.assert_array_equal(a.train_index, b.train_index)
    with pytest.raises(ValueError):
        split(d.take([0]), 0.5, 1)


@given(st.integers(2, 60), st.floats(0.05, 0.95), st.integers(0, 10**6))
def test_split_partitions_rows(n, frac, seed):
    d = Dataset(np.zeros((n, 1)), np.arange(float(n)))
    try:
        s = split(d, frac, seed)
    except ValueError:
        return  # fraction rounds one side to empty
    idx = np.concatenate([s.train_index, s.test_index])
    assert np.intersect1d(s.train_index, s.test_index).size == 0
    np.testing.assert_array_equal(np.sort(idx), np.arange(n))
    np.testing.assert_array_equal(s.test.y, d.y[s.test_index])


def test_inject_noise():
    g = np.random.default_rng(1)
    d = Dataset(np.zeros((10000, 1)), g.standard_normal(10000) * 3)
    same = inject_response_noise(d, 0.0, 5)
    np.testing.assert_array_equal(same.y, d.y)
    noisy = inject_response_noise(d, 1.0, 5)
    diff_var = sample_variance(noisy.y - d.y)
    assert abs(diff_var / d.sigma2_y_hat - 1) < 0.10
    with pytest.raises(ValueError):
        inject_response_noise(d, -0.1, 5)


def test_kfold_partition():
    folds = kfold_indices(23, 4, 0)
    assert len(folds) == 4
    np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(23))
    assert max(map(len, folds)) - min(map(len, folds)) <= 1
