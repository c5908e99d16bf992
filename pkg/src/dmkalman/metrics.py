"""Error metrics, regression alignment and consecutive k-fold splits."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .numkit import pseudo_inverse
from .series import values_of

NRMSE_NORMALIZATION = "range"


def _paired(est, truth) -> tuple[np.ndarray, np.ndarray]:
    a = values_of(est)
    b = values_of(truth)
    if a.shape != b.shape:
        raise InvalidInputError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def nrmse(est, truth) -> np.ndarray:
    """Per-coordinate RMSE divided by the range (max - min) of the truth."""
    a, b = _paired(est, truth)
    span = b.max(axis=0) - b.min(axis=0)
    if np.any(span == 0):
        raise InvalidInputError("truth coordinate is constant; range normalization undefined")
    return np.sqrt(np.mean((a - b) ** 2, axis=0)) / span


def armse(est_runs, truth_runs) -> np.ndarray:
    """Per-time RMSE across realizations: ``sqrt(mean_k ||est_n^k - truth_n^k||^2)``."""
    if len(est_runs) != len(truth_runs) or len(est_runs) == 0:
        raise InvalidInputError("need matching, non-empty lists of runs")
    sq = None
    for e, t in zip(est_runs, truth_runs):
        a, b = _paired(e, t)
        err = np.sum((a - b) ** 2, axis=1)
        if sq is None:
            sq = err
        elif err.shape != sq.shape:
            raise InvalidInputError("all runs must have the same length")
        else:
            sq = sq + err
    return np.sqrt(sq / len(est_runs))


def pearson(a, b) -> float:
    x = np.asarray(a, dtype=float).ravel()
    y = np.asarray(b, dtype=float).ravel()
    if x.shape != y.shape or x.size < 2:
        raise InvalidInputError("pearson needs two equal-length sequences of length >= 2")
    x = x - x.mean()
    y = y - y.mean()
    sx = np.sqrt(x @ x)
    sy = np.sqrt(y @ y)
    if sx == 0 or sy == 0:
        raise InvalidInputError("pearson correlation undefined for a constant input")
    return float(np.clip((x @ y) / (sx * sy), -1.0, 1.0))


def linreg_fit(X, y) -> tuple[np.ndarray, float]:
    """Ordinary least squares with intercept, solved through the pseudoinverse."""
    A = values_of(X)
    t = np.asarray(y, dtype=float).ravel()
    n, d = A.shape
    if t.shape[0] != n:
        raise InvalidInputError("X and y have different sample counts")
    if n <= d:
        raise InvalidInputError(f"need more samples than features ({n} <= {d})")
    design = np.column_stack([np.ones(n), A])
    if np.linalg.matrix_rank(design) < d + 1:
        warnings.warn("rank-deficient regression design; using the minimum-norm solution", RuntimeWarning, stacklevel=2)
    coef = pseudo_inverse(design) @ t
    return coef[1:], float(coef[0])


def linreg_predict(weights, intercept: float, X) -> np.ndarray:
    return values_of(X) @ np.asarray(weights, dtype=float) + intercept


def kfold_consecutive(n: int, k: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """``k`` contiguous test blocks; the first ``n % k`` blocks get one extra sample."""
    if k < 2:
        raise InvalidInputError("need at least 2 folds")
    if n < k:
        raise InvalidInputError(f"cannot split {n} samples into {k} folds")
    sizes = np.full(k, n // k)
    sizes[: n % k] += 1
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    idx = np.arange(n)
    return [(np.concatenate([idx[:lo], idx[hi:]]), idx[lo:hi]) for lo, hi in zip(bounds[:-1], bounds[1:])]


def regression_correlation(features, target, train_idx, eval_idx=None) -> float:
    """Fit target on features over ``train_idx``; Pearson r of the prediction on ``eval_idx``."""
    A = values_of(features)
    y = np.asarray(target, dtype=float).ravel()
    w, b = linreg_fit(A[train_idx], y[train_idx])
    idx = np.arange(len(y)) if eval_idx is None else eval_idx
    return pearson(linreg_predict(w, b, A[idx]), y[idx])


def plateau_step(curve, frac: float = 0.10, tail: float = 0.25) -> int:
    """First step at which the curve comes within ``frac`` of its final plateau.

    The plateau is the mean of the last ``tail`` fraction of the curve.
    """
    c = np.asarray(curve, dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise InvalidInputError("curve must be a non-empty 1-D sequence")
    if not (0 < frac and 0 < tail <= 1):
        raise InvalidInputError("need frac > 0 and 0 < tail <= 1")
    n_tail = max(1, int(round(tail * c.size)))
    level = c[-n_tail:].mean()
    inside = np.abs(c - level) <= frac * abs(level)
    return int(np.argmax(inside))


@dataclass
class MetricReport:
    """Metrics for one algorithm over ``M`` realizations."""

    algorithm: str
    nrmse: np.ndarray | None = None  # (M, m)
    armse: np.ndarray | None = None  # (T,)
    correlations: np.ndarray | None = None  # (M, d)
    metadata: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        for arr in (self.nrmse, self.correlations):
            if arr is not None:
                return int(np.asarray(arr).shape[0])
        return 1

    def to_dict(self) -> dict:
        d = {"algorithm": self.algorithm, "M": self.M}
        if self.nrmse is not None:
            d["nrmse_normalization"] = NRMSE_NORMALIZATION
            d["nrmse"] = np.asarray(self.nrmse).tolist()
            d["nrmse_mean"] = np.mean(self.nrmse, axis=0).tolist()
            d["nrmse_std"] = np.std(self.nrmse, axis=0).tolist()
        if self.armse is not None:
            d["armse"] = np.asarray(self.armse).tolist()
        if self.correlations is not None:
            d["correlations"] = np.asarray(self.correlations).tolist()
            d["correlation_mean"] = np.mean(self.correlations, axis=0).tolist()
            d["correlation_std"] = np.std(self.correlations, axis=0).tolist()
        d["metadata"] = self.metadata
        return d
