import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmkalman import metrics
from dmkalman.errors import InvalidInputError


def test_nrmse_examples():
    t = np.array([[0.0], [2.0]])
    assert metrics.nrmse(t, t)[0] == 0.0
    assert metrics.nrmse(np.zeros((2, 1)), t)[0] == pytest.approx(np.sqrt(2) / 2, abs=1e-6)
    assert metrics.nrmse(t + 0.5, t)[0] == pytest.approx(0.25)


def test_nrmse_constant_truth_rejected():
    with pytest.raises(InvalidInputError):
        metrics.nrmse(np.zeros((3, 1)), np.ones((3, 1)))


def test_nrmse_shape_mismatch():
    with pytest.raises(InvalidInputError):
        metrics.nrmse(np.zeros((3, 1)), np.zeros((4, 1)))


def test_armse_examples():
    t = [np.zeros((2, 1))]
    np.testing.assert_array_equal(metrics.armse(t, t), [0.0, 0.0])
    np.testing.assert_allclose(metrics.armse([np.array([[1.0], [2.0]])], t), [1.0, 2.0])
    runs = [np.array([[1.0]]), np.array([[3.0]])]
    assert metrics.armse(runs, [np.zeros((1, 1))] * 2)[0] == pytest.approx(np.sqrt(5))


def test_armse_length_mismatch():
    with pytest.raises(InvalidInputError):
        metrics.armse([np.zeros((2, 1)), np.zeros((3, 1))], [np.zeros((2, 1)), np.zeros((3, 1))])
    with pytest.raises(InvalidInputError):
        metrics.armse([np.zeros((2, 1))], [])


@given(st.integers(1, 20), st.integers(0, 2**31 - 1))
def test_metrics_invariant_to_common_time_shift(shift, seed):
    r = np.random.default_rng(seed)
    t = r.standard_normal((40, 2))
    e = t + 0.1 * r.standard_normal((40, 2))
    np.testing.assert_allclose(metrics.nrmse(np.roll(e, shift, 0), np.roll(t, shift, 0)), metrics.nrmse(e, t), rtol=1e-12)
    np.testing.assert_allclose(
        np.sort(metrics.armse([np.roll(e, shift, 0)], [np.roll(t, shift, 0)])), np.sort(metrics.armse([e], [t])), rtol=1e-12
    )


def test_pearson_examples(rng):
    a = rng.standard_normal(20)
    assert metrics.pearson(a, 2 * a + 3) == pytest.approx(1.0)
    assert metrics.pearson(a, -a) == pytest.approx(-1.0)
    assert metrics.pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5)


def test_pearson_constant_rejected():
    with pytest.raises(InvalidInputError):
        metrics.pearson([1, 1, 1], [1, 2, 3])


@given(st.floats(-5, 5).filter(lambda s: abs(s) > 1e-3), st.floats(-5, 5), st.integers(0, 2**31 - 1))
def test_pearson_affine_invariance(scale, shift, seed):
    r = np.random.default_rng(seed)
    a, b = r.standard_normal(30), r.standard_normal(30)
    assert metrics.pearson(scale * a + shift, b) == pytest.approx(np.sign(scale) * metrics.pearson(a, b), abs=1e-9)


def test_linreg_exact_affine(rng):
    X = rng.standard_normal((30, 3))
    y = X @ [1.0, -2.0, 0.5] + 4.0
    w, b = metrics.linreg_fit(X, y)
    assert np.abs(metrics.linreg_predict(w, b, X) - y).max() < 1e-10


def test_linreg_orthonormal_design(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((20, 3)))
    w_true = np.array([3.0, -1.0, 2.0])
    w, _ = metrics.linreg_fit(Q, Q @ w_true)
    np.testing.assert_allclose(w, w_true, atol=1e-10)


def test_linreg_noisy_within_three_stderr():
    r = np.random.default_rng(8)
    n, sigma = 500, 0.5
    X = r.standard_normal((n, 2))
    w_true = np.array([1.5, -0.7])
    y = X @ w_true + 0.3 + sigma * r.standard_normal(n)
    w, _ = metrics.linreg_fit(X, y)
    design = np.column_stack([np.ones(n), X])
    stderr = sigma * np.sqrt(np.diag(np.linalg.inv(design.T @ design)))[1:]
    assert np.all(np.abs(w - w_true) < 3 * stderr)


@given(st.integers(0, 2**31 - 1))
def test_linreg_residuals_orthogonal(seed):
    r = np.random.default_rng(seed)
    X = r.standard_normal((25, 3))
    y = r.standard_normal(25)
    w, b = metrics.linreg_fit(X, y)
    resid = y - metrics.linreg_predict(w, b, X)
    design = np.column_stack([np.ones(25), X])
    assert np.abs(design.T @ resid).max() < 1e-9


def test_linreg_rank_deficient_warns(rng):
    x = rng.standard_normal(10)
    with pytest.warns(RuntimeWarning):
        metrics.linreg_fit(np.column_stack([x, x]), x)


def test_linreg_needs_more_samples_than_features():
    with pytest.raises(InvalidInputError):
        metrics.linreg_fit(np.zeros((2, 2)), np.zeros(2))


def test_linreg_full_rank_no_warning(rng):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        metrics.linreg_fit(rng.standard_normal((10, 2)), rng.standard_normal(10))


def test_kfold_examples():
    folds = metrics.kfold_consecutive(10, 5)
    assert [list(te) for _, te in folds] == [[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]]
    sizes = [len(te) for _, te in metrics.kfold_consecutive(11, 5)]
    assert sizes == [3, 2, 2, 2, 2]


def test_kfold_errors():
    with pytest.raises(InvalidInputError):
        metrics.kfold_consecutive(3, 5)
    with pytest.raises(InvalidInputError):
        metrics.kfold_consecutive(10, 1)


@given(st.integers(2, 12), st.integers(0, 200))
def test_kfold_partitions(k, extra):
    n = k + extra
    folds = metrics.kfold_consecutive(n, k)
    tests = np.concatenate([te for _, te in folds])
    np.testing.assert_array_equal(tests, np.arange(n))
    for tr, te in folds:
        assert len(np.intersect1d(tr, te)) == 0 and len(tr) + len(te) == n
        assert np.all(np.diff(te) == 1)
        assert len(te) in (n // k, -(-n // k))


def test_regression_correlation_perfect(rng):
    F = rng.standard_normal((50, 2))
    y = F @ [1.0, 2.0]
    assert metrics.regression_correlation(F, y, np.arange(10)) == pytest.approx(1.0)


def test_plateau_step():
    curve = np.concatenate([np.linspace(5, 1, 20), np.ones(80)])
    step = metrics.plateau_step(curve)
    assert curve[step - 1] > 1.1 and abs(curve[step] - 1) <= 0.1
    assert metrics.plateau_step(np.ones(10)) == 0
    rising = np.concatenate([np.zeros(5), np.ones(50)])
    assert metrics.plateau_step(rising) == 5
    with pytest.raises(InvalidInputError):
        metrics.plateau_step([])


def test_metric_report_dict():
    rep = metrics.MetricReport("dmk", nrmse=np.array([[0.1, 0.2], [0.3, 0.4]]), metadata={"seed": 1})
    d = rep.to_dict()
    assert d["M"] == 2 and d["nrmse_normalization"] == "range"
    np.testing.assert_allclose(d["nrmse_mean"], [0.2, 0.3])
    assert metrics.MetricReport("x").M == 1
