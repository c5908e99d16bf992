"""Dense linear-algebra helpers: SVD pseudoinverse and symmetric eigensolver."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import InvalidInputError


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Validate and return ``M`` as a finite 2-D float array."""
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return A


def default_rel_tol(shape: tuple[int, int]) -> float:
    return 1e-10 * max(shape)


def pseudo_inverse(M, rel_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse via SVD.

    Singular values ``s <= rel_tol * s_max`` are treated as zero. The default
    cutoff is ``1e-10 * max(rows, cols)`` relative to the largest singular value.
    """
    A = as_matrix(M)
    if rel_tol is None:
        rel_tol = default_rel_tol(A.shape)
    if not 0.0 < rel_tol < 1.0:
        raise InvalidInputError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[1], A.shape[0]))
    keep = s > rel_tol * s[0]
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vt.T * s_inv) @ U.T


def fix_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so the largest-magnitude entry is positive.

    Ties on magnitude go to the lowest index (``argmax`` semantics).
    """
    V = np.array(V, dtype=float, copy=True)
    if V.ndim == 1:
        return V if V[np.argmax(np.abs(V))] >= 0 else -V
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def sym_eigs(S, k: int | None = None, sym_tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Top-``k`` eigenpairs of a symmetric matrix, eigenvalues descending.

    Returns ``(values, vectors)`` with unit-norm eigenvectors as columns,
    sign-normalized with :func:`fix_signs`.
    """
    A = as_matrix(S)
    n = A.shape[0]
    if A.shape[1] != n:
        raise InvalidInputError(f"matrix must be square, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.max(np.abs(A - A.T)) > sym_tol * scale:
        raise InvalidInputError("matrix is not symmetric")
    if k is None:
        k = n
    if not 1 <= k <= n:
        raise InvalidInputError(f"k must be in [1, {n}], got {k}")
    A = 0.5 * (A + A.T)
    values, vectors = scipy.linalg.eigh(A, subset_by_index=[n - k, n - 1])
    order = np.argsort(values, kind="stable")[::-1]
    values = values[order]
    vectors = vectors[:, order]
    vectors /= np.linalg.norm(vectors, axis=0)
    return values, fix_signs(vectors)
