"""Local measurement statistics: sliding-window covariances and the modified
Mahalanobis distance built from their pseudoinverses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalDegeneracyError
from .numkit import pseudo_inverse
from .series import values_of

NEGATIVE_CLAMP = -1e-12


@dataclass(frozen=True)
class LocalCovariances:
    cov: np.ndarray  # (T, m, m)
    pinv: np.ndarray  # (T, m, m)
    window: int

    def __len__(self) -> int:
        return self.cov.shape[0]

    @property
    def window_half_width(self) -> int:
        return self.window // 2


def window_bounds(n: int, T: int, window: int) -> tuple[int, int]:
    """Half-open sample range ``[lo, hi)`` of the window centred at ``n``."""
    lo = n - window // 2
    hi = n + (window - window // 2)
    return max(lo, 0), min(hi, T)


def sliding_covariance(Z, window: int) -> LocalCovariances:
    """Population covariance of the window around every sample.

    The window centred at ``n`` spans ``n - window//2 ... n + ceil(window/2) - 1``
    and is truncated at the series boundaries, so every sample gets a matrix.
    """
    X = values_of(Z)
    T, m = X.shape
    if window < 2:
        raise InvalidInputError(f"covariance window must be >= 2, got {window}")
    if window > T:
        raise InvalidInputError(f"covariance window {window} exceeds series length {T}")

    cov = np.empty((T, m, m))
    for n in range(T):
        lo, hi = window_bounds(n, T, window)
        W = X[lo:hi] - X[lo:hi].mean(axis=0)
        cov[n] = W.T @ W / (hi - lo)
    cov = 0.5 * (cov + np.transpose(cov, (0, 2, 1)))

    pinv = np.empty_like(cov)
    for i in range(T):
        if np.any(cov[i]):
            pinv[i] = pseudo_inverse(cov[i])
        else:
            pinv[i] = 0.0
    pinv = 0.5 * (pinv + np.transpose(pinv, (0, 2, 1)))
    return LocalCovariances(cov=cov, pinv=pinv, window=int(window))


def mahalanobis(z_s, z_t, Cs_pinv, Ct_pinv) -> float:
    """Modified Mahalanobis distance ``sqrt(0.5 d^T (Cs^+ + Ct^+) d)``, ``d = z_s - z_t``."""
    a = np.atleast_1d(np.asarray(z_s, dtype=float))
    b = np.atleast_1d(np.asarray(z_t, dtype=float))
    Cs = np.atleast_2d(np.asarray(Cs_pinv, dtype=float))
    Ct = np.atleast_2d(np.asarray(Ct_pinv, dtype=float))
    m = a.shape[0]
    if a.shape != (m,) or b.shape != (m,) or Cs.shape != (m, m) or Ct.shape != (m, m):
        raise InvalidInputError("dimension mismatch between measurements and covariance pseudoinverses")
    d = a - b
    q = 0.5 * (d @ Cs @ d + d @ Ct @ d)
    return float(np.sqrt(_clamp(q)))


def _clamp(q):
    q = np.asarray(q, dtype=float)
    bad = q < NEGATIVE_CLAMP
    if np.any(bad):
        raise NumericalDegeneracyError(f"quadratic form is negative ({q[bad].min():.3e}); pseudoinverse not PSD")
    return np.maximum(q, 0.0)


def pairwise_mahalanobis(Z, pinv: np.ndarray) -> np.ndarray:
    """All-pairs modified Mahalanobis distance matrix.

    Parameters
    ----------
    Z : (N, m) measurements
    pinv : (N, m, m) covariance pseudoinverses, one per sample
    """
    X = values_of(Z)
    N, m = X.shape
    X = X - X.mean(axis=0)
    A = np.asarray(pinv, dtype=float)
    if A.shape != (N, m, m):
        raise InvalidInputError(f"pinv must have shape {(N, m, m)}, got {A.shape}")
    # q_s(t) = d^T A_s d with d = x_s - x_t, expanded into matrix products
    Ax = np.einsum("sij,sj->si", A, X)
    self_term = np.einsum("si,si->s", X, Ax)
    cross = Ax @ X.T
    XX = (X[:, :, None] * X[:, None, :]).reshape(N, m * m)
    quad = A.reshape(N, m * m) @ XX.T
    Q = self_term[:, None] - 2.0 * cross + quad
    D2 = 0.5 * (Q + Q.T)
    # expansion loses precision for nearby points; relative tolerance for round-off
    tol = 1e-9 * (np.abs(self_term)[:, None] + np.abs(quad) + np.abs(quad).T + np.abs(self_term)[None, :]) + 1e-300
    neg = D2 < 0
    if np.any(D2[neg] < -tol[neg]):
        raise NumericalDegeneracyError("pairwise quadratic form is negative beyond round-off")
    D2 = np.maximum(D2, 0.0)
    np.fill_diagonal(D2, 0.0)
    return np.sqrt(D2)
