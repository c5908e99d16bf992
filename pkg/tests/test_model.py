import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmkalman.diffusion import Embedding
from dmkalman.errors import InvalidInputError
from dmkalman.model import (
    LinearSystemModel,
    assemble_model,
    check_detectability,
    check_observability,
    compute_lift,
    default_obs_tol,
    observability_report,
)


def unit_zero_mean(rng, n, k):
    A = rng.standard_normal((n, k))
    A -= A.mean(axis=0)
    Q, _ = np.linalg.qr(A)
    return Q[:, :k]


def embedding_from(psi, lam, eps=1.0):
    n = psi.shape[0]
    full = np.column_stack([np.full(n, 1 / np.sqrt(n)), psi])
    lam_full = np.concatenate([[0.0], lam])
    return Embedding(eps, np.exp(-eps * lam_full / 2), lam_full, full)


def test_lift_of_unit_vector_is_one(rng):
    psi = unit_zero_mean(rng, 40, 1)
    np.testing.assert_allclose(compute_lift(psi, psi), [[1.0]], rtol=1e-14)


def test_lift_of_orthogonal_measurement_is_zero(rng):
    psi = unit_zero_mean(rng, 40, 3)
    z = np.ones((40, 1))  # psi columns are zero-mean, so orthogonal to constants
    np.testing.assert_allclose(compute_lift(z, psi), np.zeros((1, 3)), atol=1e-14)


def test_lift_matches_double_loop(rng):
    Z, psi = rng.standard_normal((30, 2)), unit_zero_mean(rng, 30, 3)
    H = compute_lift(Z, psi)
    for i in range(2):
        for l in range(3):
            assert H[i, l] == pytest.approx(sum(Z[n, i] * psi[n, l] for n in range(30)), rel=1e-12)


def test_lift_length_mismatch():
    with pytest.raises(InvalidInputError):
        compute_lift(np.zeros((5, 1)), np.zeros((4, 1)))


def test_assemble_drift_and_noise(rng):
    n = 50
    psi = unit_zero_mean(rng, n, 2)
    Z = np.column_stack([rng.standard_normal(n), np.full(n, 3.0)])
    m = assemble_model(embedding_from(psi, np.array([2.0, 3.0])), Z, 0.01)
    assert m.f_diag[0] == pytest.approx(0.98)
    assert m.r_diag[1] == 0.0
    # unit norm, zero mean => variance 1/N
    assert m.q_diag[1] == pytest.approx(9 / n, rel=1e-12)
    np.testing.assert_allclose(m.offset, Z.mean(axis=0))
    np.testing.assert_array_equal(m.psi0, psi[0])
    assert np.count_nonzero(m.F - np.diag(np.diag(m.F))) == 0


def test_assemble_warns_on_unstable_step(rng):
    psi = unit_zero_mean(rng, 20, 1)
    with pytest.warns(RuntimeWarning):
        assemble_model(embedding_from(psi, np.array([300.0])), rng.standard_normal((20, 1)), 0.01)


def test_assemble_zero_rate_gives_zero_q(rng):
    psi = unit_zero_mean(rng, 20, 2)
    m = assemble_model(embedding_from(psi, np.array([0.0, 1.0])), rng.standard_normal((20, 1)), 0.1)
    assert m.q_diag[0] == 0.0


@given(st.floats(0.1, 10.0), st.integers(0, 2**31 - 1))
def test_measurement_scaling(c, seed):
    r = np.random.default_rng(seed)
    psi = unit_zero_mean(r, 30, 2)
    emb = embedding_from(psi, np.array([0.5, 1.5]))
    Z = r.standard_normal((30, 3))
    a = assemble_model(emb, Z, 0.1)
    b = assemble_model(emb, c * Z, 0.1)
    np.testing.assert_allclose(b.H, c * a.H, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(b.r_diag, c**2 * a.r_diag, rtol=1e-10)
    np.testing.assert_array_equal(a.f_diag, b.f_diag)
    np.testing.assert_array_equal(a.q_diag, b.q_diag)
    tol = 1e-3
    np.testing.assert_array_equal(check_observability(a.H, tol), check_observability(b.H, c * tol))


def test_model_validation():
    with pytest.raises(InvalidInputError):
        LinearSystemModel([1.0], [[1.0, 2.0]], [1.0], [1.0], 0.1)
    with pytest.raises(InvalidInputError):
        LinearSystemModel([1.0], [[1.0]], [-1.0], [1.0], 0.1)
    with pytest.raises(InvalidInputError):
        LinearSystemModel([1.0], [[1.0]], [1.0], [1.0], 0.0)


def test_model_json_round_trip(rng):
    m = LinearSystemModel(rng.random(3), rng.standard_normal((2, 3)), rng.random(3), rng.random(2), 0.5, offset=[1.0, 2.0], psi0=rng.random(3))
    back = LinearSystemModel.from_dict(m.to_dict())
    for name in ("f_diag", "H", "q_diag", "r_diag", "offset", "psi0"):
        np.testing.assert_array_equal(getattr(back, name), getattr(m, name))
    assert back.dt == m.dt


def test_model_dict_rejects_unknown_and_missing_keys():
    d = LinearSystemModel([0.5], [[1.0]], [0.1], [0.2], 1.0).to_dict()
    with pytest.raises(InvalidInputError):
        LinearSystemModel.from_dict(dict(d, extra=1))
    d.pop("H")
    with pytest.raises(InvalidInputError):
        LinearSystemModel.from_dict(d)


def test_observability_examples():
    H = np.array([[0.0, 0.5], [0.0, 0.0]])
    np.testing.assert_array_equal(check_observability(H, 1e-8), [False, True])


def test_detectability_examples():
    H = np.array([[0.0, 1.0]])
    obs = check_observability(H, 1e-8)
    for f0, expected in ((-0.1, True), (0.98, False)):
        m = LinearSystemModel([f0, 0.5], H, [0.1, 0.1], [0.1], 0.01)
        assert check_detectability(m, obs) is expected
    m = LinearSystemModel([0.98, 0.98], np.ones((1, 2)), [0.1, 0.1], [0.1], 0.01)
    assert check_detectability(m, check_observability(m.H))


def test_observability_report_verdict():
    m = LinearSystemModel([0.98, 0.5], np.array([[0.0, 1.0]]), [0.1, 0.1], [0.1], 0.01)
    rep = observability_report(m)
    assert not rep.verdict and not rep.all_observable
    assert rep.tol == pytest.approx(default_obs_tol(m.H))
    d = rep.to_dict()
    assert d["observable"] == [False, True] and d["verdict"] is False


def test_no_warning_for_stable_step(rng):
    psi = unit_zero_mean(rng, 20, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assemble_model(embedding_from(psi, np.array([1.0])), rng.standard_normal((20, 1)), 0.01)
