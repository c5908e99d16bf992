"""Kalman filtering in diffusion-maps coordinates learned from noisy measurements."""

__version__ = "0.1.0"

from . import (  # noqa: E402
    baselines,
    diffusion,
    dmk,
    errors,
    features,
    ingest,
    metrics,
    model,
    numkit,
    pipeline,
    rng,
    series,
    sims,
)
from .diffusion import Embedding  # noqa: E402
from .dmk import FilterState  # noqa: E402
from .errors import DMKError, InvalidInputError, NumericalDegeneracyError, StageError  # noqa: E402
from .metrics import MetricReport  # noqa: E402
from .model import LinearSystemModel  # noqa: E402
from .series import TimeSeries  # noqa: E402

__all__ = [
    "baselines",
    "diffusion",
    "dmk",
    "errors",
    "features",
    "ingest",
    "metrics",
    "model",
    "numkit",
    "pipeline",
    "rng",
    "series",
    "sims",
    "Embedding",
    "FilterState",
    "LinearSystemModel",
    "MetricReport",
    "TimeSeries",
    "DMKError",
    "InvalidInputError",
    "NumericalDegeneracyError",
    "StageError",
]
