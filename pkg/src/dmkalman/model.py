"""Data-driven linear state-space model in diffusion-maps coordinates.

State ``Psi_n`` (the nontrivial eigenvector values at sample ``n``) evolves as
``Psi_{n+1} = F Psi_n + noise`` with ``F = diag(1 - lam * dt)`` and is observed
through the lift ``z_n = offset + H Psi_n + noise``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .diffusion import Embedding
from .errors import InvalidInputError
from .series import values_of

DEFAULT_OBS_REL_TOL = 1e-8


@dataclass(frozen=True)
class LinearSystemModel:
    """The quadruple ``(F, H, Q, R)`` plus time step.

    ``F``, ``Q`` and ``R`` are diagonal and stored as their diagonals.
    ``offset`` is the constant (trivial-eigenvector) term of the lift, i.e.
    the measurement mean; zero for hand-built models.
    """

    f_diag: np.ndarray  # (k,)
    H: np.ndarray  # (m, k)
    q_diag: np.ndarray  # (k,)
    r_diag: np.ndarray  # (m,)
    dt: float
    offset: np.ndarray = field(default=None)  # (m,)
    psi0: np.ndarray | None = None  # first embedding row, used for filter init

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.f_diag, dtype=float))
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        q = np.atleast_1d(np.asarray(self.q_diag, dtype=float))
        r = np.atleast_1d(np.asarray(self.r_diag, dtype=float))
        k = f.shape[0]
        m = r.shape[0]
        if f.ndim != 1 or q.shape != (k,) or r.ndim != 1 or H.shape != (m, k):
            raise InvalidInputError(
                f"inconsistent model dimensions: F {f.shape}, H {H.shape}, Q {q.shape}, R {r.shape}"
            )
        if np.any(q < 0) or np.any(r < 0):
            raise InvalidInputError("Q and R diagonals must be nonnegative")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InvalidInputError(f"dt must be positive, got {self.dt}")
        off = np.zeros(m) if self.offset is None else np.atleast_1d(np.asarray(self.offset, dtype=float))
        if off.shape != (m,):
            raise InvalidInputError(f"offset must have shape ({m},), got {off.shape}")
        p0 = None if self.psi0 is None else np.atleast_1d(np.asarray(self.psi0, dtype=float))
        if p0 is not None and p0.shape != (k,):
            raise InvalidInputError(f"psi0 must have shape ({k},), got {p0.shape}")
        for name, arr in (("f_diag", f), ("H", H), ("q_diag", q), ("r_diag", r), ("offset", off)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} contains NaN or Inf")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "psi0", p0)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def k(self) -> int:
        return self.f_diag.shape[0]

    @property
    def m(self) -> int:
        return self.r_diag.shape[0]

    @property
    def F(self) -> np.ndarray:
        return np.diag(self.f_diag)

    @property
    def Q(self) -> np.ndarray:
        return np.diag(self.q_diag)

    @property
    def R(self) -> np.ndarray:
        return np.diag(self.r_diag)

    @property
    def rates(self) -> np.ndarray:
        """Continuous rates recovered from ``F = 1 - lam dt``."""
        return (1.0 - self.f_diag) / self.dt

    def to_dict(self) -> dict:
        d = {
            "F_diag": self.f_diag.tolist(),
            "H": self.H.tolist(),
            "Q_diag": self.q_diag.tolist(),
            "R_diag": self.r_diag.tolist(),
            "dt": self.dt,
            "offset": self.offset.tolist(),
        }
        if self.psi0 is not None:
            d["psi0"] = self.psi0.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LinearSystemModel":
        known = {"F_diag", "H", "Q_diag", "R_diag", "dt", "offset", "psi0"}
        extra = set(d) - known
        if extra:
            raise InvalidInputError(f"unknown model keys: {sorted(extra)}")
        missing = {"F_diag", "H", "Q_diag", "R_diag", "dt"} - set(d)
        if missing:
            raise InvalidInputError(f"missing model keys: {sorted(missing)}")
        m = np.atleast_1d(d["R_diag"]).shape[0]
        k = np.atleast_1d(d["F_diag"]).shape[0]
        H = np.asarray(d["H"], dtype=float)
        if H.size != m * k:
            raise InvalidInputError(f"H must hold {m}x{k} entries, got shape {H.shape}")
        H = H.reshape(m, k)
        return cls(
            f_diag=d["F_diag"],
            H=H,
            q_diag=d["Q_diag"],
            r_diag=d["R_diag"],
            dt=d["dt"],
            offset=d.get("offset"),
            psi0=d.get("psi0"),
        )


def compute_lift(Z, psi) -> np.ndarray:
    """Lift coefficients ``alpha[i, l] = sum_n z_n^(i) psi_n^(l)``.

    ``psi`` holds the nontrivial eigenvectors as columns.
    """
    X = values_of(Z)
    P = np.asarray(psi, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    if P.shape[0] != X.shape[0]:
        raise InvalidInputError(f"series length {X.shape[0]} != eigenvector length {P.shape[0]}")
    return X.T @ P


def assemble_model(emb: Embedding, Z, dt: float) -> LinearSystemModel:
    """Build ``(F, H, Q, R)`` from an embedding and the measurements it came from.

    ``F = diag(1 - lam dt)``, ``Q(l,l) = var(lam psi^(l))``, ``R(p,p) = var(z^(p))``
    with population variances. The lift is taken on mean-removed measurements and
    the mean goes into ``offset`` (the trivial-eigenvector term of the expansion).
    """
    X = values_of(Z)
    if emb.k < 1:
        raise InvalidInputError("embedding has no nontrivial coordinates")
    if X.shape[0] != emb.n_samples:
        raise InvalidInputError(f"series length {X.shape[0]} != embedding length {emb.n_samples}")
    if not (np.isfinite(dt) and dt > 0):
        raise InvalidInputError(f"dt must be positive, got {dt}")
    lam = emb.lam[1:]
    psi = emb.coords
    f = 1.0 - lam * dt
    if np.any(f <= -1.0):
        warnings.warn(
            "discrete drift 1 - lam*dt <= -1 for some coordinate; dt is too large for these rates",
            RuntimeWarning,
            stacklevel=2,
        )
    mean = X.mean(axis=0)
    H = compute_lift(X - mean, psi)
    q = np.var(lam[None, :] * psi, axis=0)
    r = np.var(X, axis=0)
    return LinearSystemModel(f_diag=f, H=H, q_diag=q, r_diag=r, dt=dt, offset=mean, psi0=psi[0])


@dataclass(frozen=True)
class ObservabilityReport:
    inner_products: np.ndarray  # (m, k), equals H
    observable: np.ndarray  # (k,) bool
    detectable: np.ndarray  # (k,) bool
    tol: float

    @property
    def verdict(self) -> bool:
        return bool(np.all(self.observable | self.detectable))

    @property
    def all_observable(self) -> bool:
        return bool(np.all(self.observable))

    def to_dict(self) -> dict:
        return {
            "inner_products": self.inner_products.tolist(),
            "observable": self.observable.tolist(),
            "detectable": self.detectable.tolist(),
            "tol": self.tol,
            "all_observable": self.all_observable,
            "verdict": self.verdict,
        }


def default_obs_tol(H) -> float:
    H = np.asarray(H, dtype=float)
    return DEFAULT_OBS_REL_TOL * float(np.max(np.abs(H))) if H.size else 0.0


def check_observability(H, tol: float | None = None) -> np.ndarray:
    """Per-coordinate observability: column ``l`` of ``H`` has an entry above ``tol``."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    if tol is None:
        tol = default_obs_tol(H)
    if tol < 0:
        raise InvalidInputError("tolerance must be nonnegative")
    return np.any(np.abs(H) > tol, axis=0)


def check_detectability(model: LinearSystemModel, obs_flags) -> bool:
    """Detectable iff every unobservable coordinate has ``F(l,l) < 0``."""
    obs = np.asarray(obs_flags, dtype=bool)
    if obs.shape != (model.k,):
        raise InvalidInputError(f"expected {model.k} observability flags, got {obs.shape}")
    return bool(np.all(obs | (model.f_diag < 0)))


def observability_report(model: LinearSystemModel, tol: float | None = None) -> ObservabilityReport:
    if tol is None:
        tol = default_obs_tol(model.H)
    obs = check_observability(model.H, tol)
    return ObservabilityReport(
        inner_products=model.H.copy(),
        observable=obs,
        detectable=obs | (model.f_diag < 0),
        tol=float(tol),
    )
