"""Measurements -> local covariances -> Mahalanobis kernel -> embedding -> DMK."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from . import diffusion, dmk, features
from .diffusion import Embedding
from .errors import InvalidInputError
from .model import LinearSystemModel, assemble_model
from .series import TimeSeries, values_of

EPSILON_REFERENCES = ("kernel", "euclidean")


@dataclass(frozen=True)
class EmbeddingParams:
    window: int = 30
    epsilon_multiplier: float = 1.0
    # which distances the median scale is taken over: the Mahalanobis distances
    # used in the kernel, or plain Euclidean distances between measurements
    epsilon_reference: str = "kernel"
    k: int = 2

    def __post_init__(self):
        if self.window < 2:
            raise InvalidInputError(f"covariance window must be >= 2, got {self.window}")
        if not self.epsilon_multiplier > 0:
            raise InvalidInputError("epsilon multiplier must be positive")
        if self.epsilon_reference not in EPSILON_REFERENCES:
            raise InvalidInputError(f"epsilon_reference must be one of {EPSILON_REFERENCES}")
        if self.k < 1:
            raise InvalidInputError("k must be >= 1")


def mahalanobis_distances(Z, window: int) -> np.ndarray:
    cov = features.sliding_covariance(Z, window)
    return features.pairwise_mahalanobis(Z, cov.pinv)


def build_embedding(Z, params: EmbeddingParams) -> Embedding:
    X = values_of(Z)
    if params.k + 1 > X.shape[0]:
        raise InvalidInputError(f"k={params.k} needs at least {params.k + 1} samples, got {X.shape[0]}")
    D = mahalanobis_distances(X, params.window)
    if params.epsilon_reference == "kernel":
        eps = diffusion.median_scale(D, params.epsilon_multiplier)
    else:
        eps = diffusion.median_scale(squareform(pdist(X)), params.epsilon_multiplier)
    if eps <= 0:
        raise InvalidInputError("median distance is zero; measurements are degenerate")
    K = diffusion.build_kernel(D, eps)
    _, degrees = diffusion.row_normalize(K)
    return diffusion.embed(K, degrees, params.k, eps)


def fit_dmk(Z, emb: Embedding, dt: float) -> tuple[LinearSystemModel, TimeSeries, TimeSeries]:
    """Assemble the model from ``emb`` and filter ``Z``; returns ``(model, psi_hat, z_hat)``."""
    model = assemble_model(emb, Z, dt)
    psi_hat, z_hat = dmk.run(Z, model)
    return model, psi_hat, z_hat
