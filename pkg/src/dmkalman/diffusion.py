"""Diffusion maps: Gaussian affinity kernel, Markov normalization and the
spectral embedding with eigenvalue-to-rate conversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalDegeneracyError
from .numkit import as_matrix, fix_signs, sym_eigs

MU_UPPER_SLACK = 1e-10


@dataclass(frozen=True)
class Embedding:
    """Diffusion-maps output.

    ``mu``, ``lam`` and ``psi`` include the trivial pair at index 0;
    :attr:`coords` drops it.
    """

    epsilon: float
    mu: np.ndarray  # (k+1,)
    lam: np.ndarray  # (k+1,)
    psi: np.ndarray  # (N, k+1), unit-norm columns

    @property
    def k(self) -> int:
        return self.mu.shape[0] - 1

    @property
    def n_samples(self) -> int:
        return self.psi.shape[0]

    @property
    def coords(self) -> np.ndarray:
        """Nontrivial coordinates ``psi[:, 1:]``, shape ``(N, k)``."""
        return self.psi[:, 1:]

    def truncate(self, k: int) -> "Embedding":
        if not 1 <= k <= self.k:
            raise InvalidInputError(f"cannot truncate a {self.k}-coordinate embedding to {k}")
        return Embedding(self.epsilon, self.mu[: k + 1], self.lam[: k + 1], self.psi[:, : k + 1])

    def with_rates(self, mu, lam) -> "Embedding":
        """Copy with eigenvalues/rates swapped (e.g. taken from clean data)."""
        return Embedding(self.epsilon, np.asarray(mu, float), np.asarray(lam, float), self.psi)


def _check_distance_matrix(D) -> np.ndarray:
    D = as_matrix(D, "distance matrix")
    if D.shape[0] != D.shape[1]:
        raise InvalidInputError("distance matrix must be square")
    return D


def median_scale(D, multiplier: float = 1.0) -> float:
    """``multiplier`` times the median of the strictly upper-triangular distances."""
    D = _check_distance_matrix(D)
    N = D.shape[0]
    if N < 2:
        raise InvalidInputError("need at least two points for a median distance")
    if not multiplier > 0:
        raise InvalidInputError(f"multiplier must be positive, got {multiplier}")
    return float(multiplier * np.median(D[np.triu_indices(N, k=1)]))


def build_kernel(D, epsilon: float) -> np.ndarray:
    """Gaussian affinities ``exp(-D**2 / epsilon**2)``."""
    if not (np.isfinite(epsilon) and epsilon > 0):
        raise InvalidInputError(f"epsilon must be positive, got {epsilon}")
    D = _check_distance_matrix(D)
    K = np.exp(-((D / epsilon) ** 2))
    return 0.5 * (K + K.T)


def row_normalize(K) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic normalization; returns ``(P, degrees)``."""
    K = as_matrix(K, "kernel")
    degrees = K.sum(axis=1)
    if np.any(degrees <= 0):
        raise InvalidInputError("kernel has a row with non-positive sum")
    return K / degrees[:, None], degrees


def rates_from_eigs(mu, epsilon: float):
    """Convert Markov eigenvalues to continuous rates: ``-(2/eps) log mu``.

    Accepts a scalar or an array; eigenvalues above 1 by round-off are clipped.
    """
    if not (np.isfinite(epsilon) and epsilon > 0):
        raise InvalidInputError(f"epsilon must be positive, got {epsilon}")
    m = np.asarray(mu, dtype=float)
    if np.any(m <= 0):
        raise InvalidInputError("eigenvalues must be positive to define a rate")
    if np.any(m > 1 + MU_UPPER_SLACK):
        raise InvalidInputError("eigenvalues of a Markov matrix cannot exceed 1")
    lam = -(2.0 / epsilon) * np.log(np.minimum(m, 1.0))
    lam = lam + 0.0  # normalizes -0.0
    return float(lam) if lam.ndim == 0 else lam


def embed(K, degrees, k: int, epsilon: float) -> Embedding:
    """Top ``k+1`` eigenpairs of ``P = diag(degrees)^-1 K``.

    Solved through the symmetric conjugate ``S = D^-1/2 K D^-1/2``; right
    eigenvectors of ``P`` are ``D^-1/2 v``, renormalized to unit length.
    """
    K = as_matrix(K, "kernel")
    d = np.asarray(degrees, dtype=float)
    N = K.shape[0]
    if k < 0 or k + 1 > N:
        raise InvalidInputError(f"need k + 1 <= N, got k={k}, N={N}")
    if d.shape != (N,) or np.any(d <= 0):
        raise InvalidInputError("degrees must be a positive vector matching the kernel")
    inv_sqrt = 1.0 / np.sqrt(d)
    S = K * inv_sqrt[:, None] * inv_sqrt[None, :]
    S = 0.5 * (S + S.T)
    mu, V = sym_eigs(S, k + 1)
    if np.any(mu <= 0):
        raise NumericalDegeneracyError(
            f"non-positive eigenvalue among the top {k + 1}: {mu.min():.3e}; lower k or raise epsilon"
        )
    psi = V * inv_sqrt[:, None]
    psi /= np.linalg.norm(psi, axis=0)
    psi = fix_signs(psi)
    mu = np.minimum(mu, 1.0)
    lam = rates_from_eigs(mu, epsilon)
    lam = np.atleast_1d(lam)
    return Embedding(epsilon=float(epsilon), mu=mu, lam=lam, psi=psi)


def spectral_gap(mu) -> int:
    """Suggested embedding dimension from the largest eigenvalue ratio.

    ``mu`` is the full descending sequence including the trivial ``mu^(0)``
    (pass ``embedding.mu``). Returns the number of leading coordinates before
    the largest ratio ``mu[i] / mu[i+1]``; ties go to the smallest count.
    """
    m = np.asarray(mu, dtype=float)
    if m.ndim != 1 or m.size < 4:
        raise InvalidInputError("need the trivial eigenvalue plus at least 3 nontrivial ones")
    if np.any(m <= 0):
        raise InvalidInputError("eigenvalues must be positive")
    ratios = m[:-1] / m[1:]
    best = np.flatnonzero(ratios >= ratios.max() * (1 - 1e-12))[0]
    return int(best + 1)
