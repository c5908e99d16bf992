import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.distance import pdist, squareform

from dmkalman.diffusion import build_kernel, embed, median_scale, rates_from_eigs, row_normalize, spectral_gap
from dmkalman.errors import InvalidInputError
from oracles import aligned_angle_correlation, circle_embedding


def dist3(a, b, c):
    # points whose pairwise distances are a (0-1), b (0-2), c (1-2)
    return np.array([[0, a, b], [a, 0, c], [b, c, 0]], dtype=float)


def test_median_odd_count():
    assert median_scale(dist3(1, 2, 3)) == 2.0


def test_median_multiplier():
    assert median_scale(dist3(1, 2, 3), 3.0) == 6.0


def test_median_constant_set():
    D = 2.5 * (1 - np.eye(5))
    assert median_scale(D) == 2.5


def test_median_even_count_averages_middle():
    D = squareform([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    assert median_scale(D) == 3.5


def test_median_needs_two_points():
    with pytest.raises(InvalidInputError):
        median_scale(np.zeros((1, 1)))


def test_kernel_values():
    D = dist3(0.0, 1.0, 2.0)
    D[0, 1] = D[1, 0] = 0.0
    K = build_kernel(D, 1.0)
    assert K[0, 1] == 1.0
    assert K[0, 2] == pytest.approx(np.exp(-1.0), rel=1e-15)
    np.testing.assert_array_equal(np.diag(K), 1.0)


def test_kernel_elementwise(rng):
    D = squareform(rng.random(3))
    eps = 0.8
    K = build_kernel(D, eps)
    for i in range(3):
        for j in range(3):
            assert K[i, j] == pytest.approx(np.exp(-D[i, j] ** 2 / eps**2), rel=1e-15)


@pytest.mark.parametrize("eps", [0.0, -1.0])
def test_kernel_rejects_nonpositive_epsilon(eps):
    with pytest.raises(InvalidInputError):
        build_kernel(np.zeros((2, 2)), eps)


def test_row_normalize_uniform():
    P, d = row_normalize(np.ones((2, 2)))
    np.testing.assert_array_equal(P, 0.5 * np.ones((2, 2)))
    np.testing.assert_array_equal(d, [2.0, 2.0])


def test_row_normalize_identity():
    P, _ = row_normalize(np.eye(4))
    np.testing.assert_array_equal(P, np.eye(4))


def test_row_normalize_random(rng):
    P, _ = row_normalize(rng.random((4, 4)) + 0.01)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-14)


def test_row_normalize_zero_row():
    with pytest.raises(InvalidInputError):
        row_normalize(np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_two_point_embedding_analytic():
    a = 0.3
    K = np.array([[1.0, a], [a, 1.0]])
    _, d = row_normalize(K)
    emb = embed(K, d, 1, 1.0)
    np.testing.assert_allclose(emb.mu, [1.0, (1 - a) / (1 + a)], rtol=1e-14)
    np.testing.assert_allclose(np.abs(emb.psi[:, 1]), [1 / np.sqrt(2)] * 2, rtol=1e-14)
    assert emb.psi[0, 1] * emb.psi[1, 1] < 0


def test_circle_embedding_recovers_angle():
    theta, emb, P = circle_embedding()
    est = np.arctan2(emb.psi[:, 2], emb.psi[:, 1])
    assert aligned_angle_correlation(theta, est) > 0.99
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)


def test_trivial_pair():
    _, emb, _ = circle_embedding(200)
    assert abs(emb.mu[0] - 1) < 1e-8
    psi0 = emb.psi[:, 0]
    assert np.std(psi0) / abs(np.mean(psi0)) < 1e-6
    assert emb.lam[0] < 1e-6
    assert np.all(np.diff(emb.lam) >= 0)
    assert emb.coords.shape == (200, 2)


def test_embedding_permutation_equivariance(rng):
    X = rng.standard_normal((60, 2))
    perm = rng.permutation(60)

    def run(Y):
        D = squareform(pdist(Y))
        eps = median_scale(D)
        K = build_kernel(D, eps)
        _, d = row_normalize(K)
        return embed(K, d, 3, eps)

    a, b = run(X), run(X[perm])
    np.testing.assert_allclose(a.mu, b.mu, atol=1e-10)
    np.testing.assert_allclose(a.psi[perm], b.psi, atol=1e-8)


def test_embed_rejects_k_too_large():
    K = np.ones((3, 3))
    with pytest.raises(InvalidInputError):
        embed(K, K.sum(1), 3, 1.0)


def test_truncate_and_with_rates():
    _, emb, _ = circle_embedding(100)
    t = emb.truncate(1)
    assert t.k == 1 and t.psi.shape == (100, 2)
    swapped = emb.with_rates([1.0, 0.5, 0.4], [0.0, 1.0, 2.0])
    np.testing.assert_array_equal(swapped.psi, emb.psi)
    np.testing.assert_array_equal(swapped.lam, [0.0, 1.0, 2.0])
    with pytest.raises(InvalidInputError):
        emb.truncate(3)


def test_rates_examples():
    assert rates_from_eigs(1.0, 3.0) == 0.0
    eps = 0.7
    assert rates_from_eigs(np.exp(-eps / 2), eps) == pytest.approx(1.0, rel=1e-14)
    assert rates_from_eigs(0.9, 2.0) == pytest.approx(0.105361, abs=1e-6)


@pytest.mark.parametrize("mu", [0.0, -0.1, 1.0 + 1e-9])
def test_rates_reject_out_of_range(mu):
    with pytest.raises(InvalidInputError):
        rates_from_eigs(mu, 1.0)


@given(st.floats(1e-6, 1.0), st.floats(1e-3, 10.0))
def test_rates_nonnegative_and_invertible(mu, eps):
    lam = rates_from_eigs(mu, eps)
    assert lam >= 0
    assert np.exp(-eps * lam / 2) == pytest.approx(mu, rel=1e-9)


def test_spectral_gap_examples():
    assert spectral_gap([1, 0.9, 0.88, 0.3, 0.29]) == 3
    assert spectral_gap([1, 0.9, 0.1, 0.09]) == 2
    assert spectral_gap(0.8 ** np.arange(0, 8)) == 1


def test_spectral_gap_needs_three_nontrivial_values():
    with pytest.raises(InvalidInputError):
        spectral_gap([1.0, 0.9, 0.5])
