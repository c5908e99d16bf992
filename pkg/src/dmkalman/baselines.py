"""Comparison algorithms: a bootstrap particle filter given the true model,
a fixed-gain linear observer in diffusion-maps coordinates, and PCA."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidInputError, NumericalDegeneracyError
from .model import LinearSystemModel
from .numkit import fix_signs
from .rng import stream
from .series import TimeSeries, values_of

DIVERGENCE_FACTOR = 1e6


@dataclass
class ParticleCloud:
    particles: np.ndarray  # (N_p, d)
    weights: np.ndarray  # (N_p,)

    def __post_init__(self):
        if self.particles.shape[0] < 1:
            raise InvalidInputError("need at least one particle")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise InvalidInputError("particle weights must sum to 1")

    @property
    def n(self) -> int:
        return self.particles.shape[0]

    def ess(self) -> float:
        return 1.0 / float(np.sum(self.weights**2))

    def mean(self) -> np.ndarray:
        return self.weights @ self.particles


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn by systematic resampling (one uniform offset, N even strata)."""
    n = weights.shape[0]
    positions = (rng.random() + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions, side="right")


def normalize_log_weights(logw: np.ndarray, step: int) -> np.ndarray:
    top = np.max(logw)
    if not np.isfinite(top):
        raise NumericalDegeneracyError("all particle weights are zero", step=step)
    w = np.exp(logw - top)
    return w / w.sum()


def particle_filter(
    Z,
    dyn: Callable[[np.ndarray, np.random.Generator], np.ndarray],
    loglik: Callable[[np.ndarray, np.ndarray], np.ndarray],
    init: Callable[[int, np.random.Generator], np.ndarray],
    measure: Callable[[np.ndarray], np.ndarray] | None = None,
    n_particles: int = 1000,
    seed: int = 0,
    realization: int = 0,
) -> tuple[TimeSeries, TimeSeries]:
    """Bootstrap particle filter with systematic resampling at ESS < N_p / 2.

    Parameters
    ----------
    Z : measurements, ``(T, m)``
    dyn : ``dyn(particles, rng)`` samples the next state for every particle
    loglik : ``loglik(z, particles)`` log measurement density per particle
    init : ``init(n, rng)`` draws the particles for the first sample
    measure : clean measurement function applied to the weighted-mean state

    Returns
    -------
    (state_estimates, measurement_estimates)
    """
    X = values_of(Z)
    if n_particles < 10:
        raise InvalidInputError("particle filter needs at least 10 particles")
    rng = stream(seed, "particle_filter", realization)
    particles = np.atleast_2d(np.asarray(init(n_particles, rng), dtype=float))
    if particles.shape[0] != n_particles:
        particles = particles.T
    weights = np.full(n_particles, 1.0 / n_particles)
    means = np.empty((X.shape[0], particles.shape[1]))
    for n, z in enumerate(X):
        if n > 0:
            particles = dyn(particles, rng)
        logw = np.log(weights) + loglik(z, particles)
        weights = normalize_log_weights(logw, n)
        means[n] = weights @ particles
        if 1.0 / np.sum(weights**2) < n_particles / 2:
            idx = systematic_resample(weights, rng)
            particles = particles[idx]
            weights = np.full(n_particles, 1.0 / n_particles)
    dt = Z.dt if isinstance(Z, TimeSeries) else 1.0
    z_hat = means if measure is None else np.asarray(measure(means), dtype=float)
    return TimeSeries(means, dt), TimeSeries(z_hat, dt)


def linear_observer(Z, model: LinearSystemModel, gamma: float, psi0=None) -> TimeSeries:
    """Fixed-gain observer ``psi_n = F psi_{n-1} + gamma H^T (z_n - offset - H F psi_{n-1})``.

    A reimplementation with a gradient-style gain; the gain structure of the
    original observer is not reproduced here.
    """
    X = values_of(Z)
    if gamma < 0:
        raise InvalidInputError(f"gamma must be nonnegative, got {gamma}")
    if X.shape[1] != model.m:
        raise InvalidInputError("measurement dimension does not match the model")
    if psi0 is not None:
        x = np.atleast_1d(np.asarray(psi0, dtype=float))
    elif model.psi0 is not None:
        x = model.psi0.copy()
    else:
        x = np.zeros(model.k)
    scale = max(float(np.linalg.norm(x)), float(np.max(np.abs(model.H))) if model.H.size else 0.0, 1e-12)
    gain = gamma * model.H.T
    out = np.empty((X.shape[0], model.k))
    for n, z in enumerate(X):
        pred = model.f_diag * x
        x = pred + gain @ (z - model.offset - model.H @ pred)
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_FACTOR * scale:
            raise NumericalDegeneracyError("linear observer diverged", step=n)
        out[n] = x
    dt = Z.dt if isinstance(Z, TimeSeries) else model.dt
    return TimeSeries(out, dt)


@dataclass(frozen=True)
class PCAResult:
    scores: np.ndarray  # (T, k)
    components: np.ndarray  # (m, k)
    explained_variance: np.ndarray  # (k,)
    mean: np.ndarray  # (m,)

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        return self.explained_variance / self.total_variance

    total_variance: float = 1.0


def pca(X, k: int) -> PCAResult:
    A = values_of(X)
    m = A.shape[1]
    if not 1 <= k <= m:
        raise InvalidInputError(f"k must be in [1, {m}], got {k}")
    mean = A.mean(axis=0)
    C = A - mean
    _, s, Vt = np.linalg.svd(C, full_matrices=False)
    comps = fix_signs(Vt[:k].T)
    var = s**2 / A.shape[0]
    return PCAResult(
        scores=C @ comps,
        components=comps,
        explained_variance=var[:k],
        mean=mean,
        total_variance=float(var.sum()) if var.sum() > 0 else 1.0,
    )


def pca_embed(X, k: int) -> TimeSeries:
    """Projection of mean-centred data on the top ``k`` principal directions."""
    res = pca(X, k)
    return TimeSeries(res.scores, X.dt if isinstance(X, TimeSeries) else 1.0)
