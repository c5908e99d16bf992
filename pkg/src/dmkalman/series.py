"""The TimeSeries carrier used for states, measurements, embeddings and estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class TimeSeries:
    """``T`` samples of ``m``-dimensional real vectors at a fixed time step.

    ``values`` is stored as a read-only ``(T, m)`` float array.
    """

    values: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise InvalidInputError(f"time series values must be (T, m) with T, m >= 1, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("time series contains NaN or Inf")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError(f"dt must be positive, got {self.dt}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.dt


def values_of(X) -> np.ndarray:
    """Return the ``(T, m)`` array behind a TimeSeries or array-like."""
    if isinstance(X, TimeSeries):
        return X.values
    v = np.asarray(X, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2:
        raise InvalidInputError(f"expected a (T, m) array, got shape {v.shape}")
    return v
