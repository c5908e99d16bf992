import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dmkalman.errors import InvalidInputError
from dmkalman.numkit import as_matrix, default_rel_tol, fix_signs, pseudo_inverse, sym_eigs


def moore_penrose_ok(M, Mp, tol):
    scale = max(1.0, np.abs(M).max(), np.abs(Mp).max())
    return (
        np.allclose(M @ Mp @ M, M, atol=tol * scale)
        and np.allclose(Mp @ M @ Mp, Mp, atol=tol * scale**3)
        and np.allclose((M @ Mp).T, M @ Mp, atol=tol * scale)
        and np.allclose((Mp @ M).T, Mp @ M, atol=tol * scale)
    )


def test_pinv_identity():
    np.testing.assert_array_equal(pseudo_inverse(np.eye(3)), np.eye(3))


def test_pinv_rank_deficient_diagonal():
    np.testing.assert_allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]), atol=1e-15)


def test_pinv_random_4x3_moore_penrose(rng):
    M = rng.standard_normal((4, 3))
    assert moore_penrose_ok(M, pseudo_inverse(M), 1e-8)


def test_pinv_zero_matrix_is_zero():
    np.testing.assert_array_equal(pseudo_inverse(np.zeros((2, 3))), np.zeros((3, 2)))


def test_pinv_drops_tiny_singular_values():
    M = np.diag([1.0, 1e-14])
    np.testing.assert_allclose(pseudo_inverse(M, rel_tol=1e-10), np.diag([1.0, 0.0]))


def test_pinv_default_tolerance_scales_with_shape():
    assert default_rel_tol((4, 7)) == pytest.approx(7e-10)


@pytest.mark.parametrize("bad", [np.zeros((0, 3)), np.array([[np.nan, 1.0]]), np.array([[np.inf]])])
def test_matrix_rejects_empty_and_nonfinite(bad):
    with pytest.raises(InvalidInputError):
        pseudo_inverse(bad)


@pytest.mark.parametrize("tol", [0.0, 1.0, -1e-3])
def test_pinv_rejects_bad_tolerance(tol):
    with pytest.raises(InvalidInputError):
        pseudo_inverse(np.eye(2), rel_tol=tol)


@given(st.integers(1, 50), st.integers(1, 50), st.integers(0, 2**31 - 1))
def test_pinv_moore_penrose_property(r, c, seed):
    M = np.random.default_rng(seed).standard_normal((r, c))
    assert moore_penrose_ok(M, pseudo_inverse(M), 1e-8)


def test_sym_eigs_diagonal():
    vals, vecs = sym_eigs(np.diag([3.0, 1.0]), 2)
    np.testing.assert_allclose(vals, [3.0, 1.0])
    np.testing.assert_allclose(vecs, np.eye(2), atol=1e-15)


def test_sym_eigs_analytic_2x2():
    vals, vecs = sym_eigs(np.array([[0.0, 1.0], [1.0, 0.0]]), 2)
    np.testing.assert_allclose(vals, [1.0, -1.0], atol=1e-15)
    s = 1 / np.sqrt(2)
    # second vector: entries tie in magnitude, so the lowest index is made positive
    np.testing.assert_allclose(vecs, [[s, s], [s, -s]], atol=1e-15)


def test_sym_eigs_random_residuals(rng):
    A = rng.standard_normal((6, 6))
    S = A + A.T
    vals, vecs = sym_eigs(S, 6)
    for i in range(6):
        assert np.linalg.norm(S @ vecs[:, i] - vals[i] * vecs[:, i]) < 1e-9


def test_sym_eigs_top_k_subset(rng):
    A = rng.standard_normal((8, 8))
    S = A @ A.T
    vals, vecs = sym_eigs(S, 3)
    np.testing.assert_allclose(vals, np.sort(np.linalg.eigvalsh(S))[::-1][:3], rtol=1e-12)
    assert vecs.shape == (8, 3)


def test_sym_eigs_rejects_asymmetric():
    with pytest.raises(InvalidInputError):
        sym_eigs(np.array([[1.0, 2.0], [0.0, 1.0]]), 2)


def test_sym_eigs_rejects_large_k():
    with pytest.raises(InvalidInputError):
        sym_eigs(np.eye(2), 3)


@given(st.integers(1, 20), st.integers(0, 2**31 - 1))
def test_sym_eigs_orthonormal_and_sign_convention(n, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    vals, V = sym_eigs(A + A.T, n)
    np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-9)
    assert np.all(np.diff(vals) <= 1e-12)
    for j in range(n):
        assert V[np.argmax(np.abs(V[:, j])), j] > 0


def test_sym_eigs_deterministic(rng):
    A = rng.standard_normal((10, 10))
    S = A + A.T
    a = sym_eigs(S, 4)
    b = sym_eigs(S.copy(), 4)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_fix_signs_flips_negative_dominant_entry():
    V = np.array([[0.1, -0.2], [-0.9, 0.3]])
    out = fix_signs(V)
    np.testing.assert_array_equal(out, [[-0.1, -0.2], [0.9, 0.3]])


def test_as_matrix_promotes_nothing_1d():
    with pytest.raises(InvalidInputError):
        as_matrix(np.ones(3), "M")
