"""The Diffusion Maps Kalman (DMK) filter.

A linear Kalman filter run in diffusion-maps coordinates. The recursion is
written in the single-pass form

    kappa_n = (F P F^T + Q) H^T (H F P F^T H^T + H Q H^T + R)^-1
    psi_n   = F psi_{n-1} + kappa_n (z_n - offset - H F psi_{n-1})
    P_n     = (I - kappa_n H) (F P F^T + Q)

which is algebraically a predict/update Kalman step with prior ``F P F^T + Q``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInputError, NumericalDegeneracyError
from .model import LinearSystemModel
from .series import TimeSeries, values_of


@dataclass(frozen=True)
class FilterState:
    psi_hat: np.ndarray  # (k,)
    P: np.ndarray  # (k, k)
    kappa: np.ndarray  # (k, m)
    step_index: int = 0


def init_filter(model: LinearSystemModel, psi0=None, P0=None) -> FilterState:
    """Initial state: ``psi0`` or the model's first embedding row or zeros; ``P0`` or ``Q``."""
    k, m = model.k, model.m
    if psi0 is not None:
        x = np.atleast_1d(np.asarray(psi0, dtype=float))
    elif model.psi0 is not None:
        x = model.psi0.copy()
    else:
        x = np.zeros(k)
    P = model.Q if P0 is None else np.atleast_2d(np.asarray(P0, dtype=float))
    if x.shape != (k,) or P.shape != (k, k):
        raise InvalidInputError(f"initial state must be ({k},) and ({k}, {k}), got {x.shape} and {P.shape}")
    return FilterState(psi_hat=x.copy(), P=np.array(P, dtype=float), kappa=np.zeros((k, m)), step_index=0)


def step(state: FilterState, z, model: LinearSystemModel) -> FilterState:
    """One DMK recursion step for measurement ``z``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (model.m,):
        raise InvalidInputError(f"measurement must have shape ({model.m},), got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidInputError("measurement contains NaN or Inf")
    f = model.f_diag
    H = model.H
    FPFt = f[:, None] * state.P * f[None, :]
    HF = H * f[None, :]
    S = HF @ state.P @ HF.T + H @ model.Q @ H.T + model.R
    S = 0.5 * (S + S.T)
    prior = FPFt + model.Q
    if not np.any(S):
        raise NumericalDegeneracyError("singular innovation matrix", step=state.step_index + 1)
    try:
        # kappa^T = S^-1 (H prior)  since S and prior are symmetric
        kappa = scipy.linalg.solve(S, H @ prior, assume_a="sym").T
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalDegeneracyError("singular innovation matrix", step=state.step_index + 1) from exc
    if not np.all(np.isfinite(kappa)):
        raise NumericalDegeneracyError("singular innovation matrix", step=state.step_index + 1)
    pred = f * state.psi_hat
    psi = pred + kappa @ (z - model.offset - H @ pred)
    P = (np.eye(model.k) - kappa @ H) @ prior
    P = 0.5 * (P + P.T)
    return FilterState(psi_hat=psi, P=P, kappa=kappa, step_index=state.step_index + 1)


def run(Z, model: LinearSystemModel, init: FilterState | None = None) -> tuple[TimeSeries, TimeSeries]:
    """Filter a whole series; returns ``(psi_hat, z_hat)`` with ``z_hat = offset + H psi_hat``."""
    X = values_of(Z)
    if X.shape[1] != model.m:
        raise InvalidInputError(f"series dimension {X.shape[1]} != model measurement dimension {model.m}")
    state = init_filter(model) if init is None else init
    out = np.empty((X.shape[0], model.k))
    for n, z in enumerate(X):
        state = step(state, z, model)
        out[n] = state.psi_hat
    dt = Z.dt if isinstance(Z, TimeSeries) else model.dt
    z_hat = out @ model.H.T + model.offset
    return TimeSeries(out, dt), TimeSeries(z_hat, dt)


def koopman_apply(model: LinearSystemModel, psi_n) -> np.ndarray:
    """Conditional mean of the next coordinates: ``(1 - lam dt) * psi_n``."""
    x = np.atleast_1d(np.asarray(psi_n, dtype=float))
    if x.shape != (model.k,):
        raise InvalidInputError(f"state must have shape ({model.k},), got {x.shape}")
    return model.f_diag * x
