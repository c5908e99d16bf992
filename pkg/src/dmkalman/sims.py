"""Synthetic systems: the double-well pair observed in polar coordinates, the
drifting point on a sphere seen by Poisson "Geiger counter" sensors, a
linear-Gaussian test system, and the count-histogram transform."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .rng import stream
from .series import TimeSeries, values_of

SNR_CAP = 1e12


def double_well_drift(x, center: float) -> np.ndarray:
    y = np.asarray(x, dtype=float) - center
    return -0.5 * y**3 + y


@dataclass(frozen=True)
class PolarSimParams:
    n_samples: int = 1000
    dt: float = 0.01
    noise_scale: float = 1.0  # multiplies the process noise; 0 gives the noiseless recursion
    theta0: tuple[float, float] = (1.0, 6.0)
    centers: tuple[float, float] = (1.0, 6.0)
    seed: int = 0
    realization: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidInputError("n_samples must be >= 1")
        if not self.dt > 0:
            raise InvalidInputError("dt must be positive")
        if self.noise_scale < 0:
            raise InvalidInputError("noise_scale must be nonnegative")


def simulate_double_well(p: PolarSimParams) -> TimeSeries:
    """Euler-Maruyama path of two independent double-well coordinates.

    ``theta_{n+1} = theta_n + dt * drift(theta_n) + sqrt(2 dt) * N(0, 1)`` with
    ``drift(x) = -(x - c)**3 / 2 + (x - c)`` and wells at ``c +- sqrt(2)``.
    """
    rng = stream(p.seed, "process", p.realization)
    noise = rng.standard_normal((p.n_samples, 2)) * (np.sqrt(2.0 * p.dt) * p.noise_scale)
    centers = np.asarray(p.centers, dtype=float)
    theta = np.empty((p.n_samples, 2))
    theta[0] = p.theta0
    for n in range(p.n_samples - 1):
        theta[n + 1] = theta[n] + p.dt * double_well_drift(theta[n], centers) + noise[n]
    return TimeSeries(theta, p.dt)


def polar_measure(theta) -> np.ndarray:
    """Azimuth ``arctan(theta1 / theta2)`` and radius; works row-wise on ``(T, 2)``."""
    th = np.asarray(theta, dtype=float)
    single = th.ndim == 1
    th = np.atleast_2d(th)
    if th.shape[1] != 2:
        raise InvalidInputError("polar measurement needs 2-D states")
    r = np.hypot(th[:, 0], th[:, 1])
    if np.any(r == 0):
        raise InvalidInputError("polar angle undefined at the origin")
    with np.errstate(divide="ignore"):
        phi = np.arctan(th[:, 0] / th[:, 1])
    out = np.column_stack([phi, r])
    return out[0] if single else out


def add_gaussian_noise(Y, snr: float, seed: int, realization: int = 0, name: str = "measurement") -> TimeSeries:
    """Add white Gaussian noise with per-coordinate variance ``var(clean) / snr``."""
    if not snr > 0:
        raise InvalidInputError(f"snr must be positive, got {snr}")
    X = values_of(Y)
    snr = min(float(snr), SNR_CAP)
    sd = np.sqrt(np.var(X, axis=0) / snr)
    rng = stream(seed, name, realization)
    noisy = X + rng.standard_normal(X.shape) * sd
    return TimeSeries(noisy, Y.dt if isinstance(Y, TimeSeries) else 1.0)


def noise_std_for_snr(Y, snr: float) -> np.ndarray:
    return np.sqrt(np.var(values_of(Y), axis=0) / min(float(snr), SNR_CAP))


def _default_sensors():
    return ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


@dataclass(frozen=True)
class SphereSimParams:
    n_samples: int = 300_000
    dt: float = 0.5
    c: float = 0.5
    b: float = 0.01
    sensors: tuple = field(default_factory=_default_sensors)
    lambda_v: float = 0.1
    noise_scale: float = 1.0
    theta0: tuple | None = None  # defaults to the attractors
    seed: int = 0
    realization: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidInputError("n_samples must be >= 1")
        if not self.dt > 0:
            raise InvalidInputError("dt must be positive")
        if not self.c > 0:
            raise InvalidInputError("drift rate c must be positive")
        if not self.b > 0:
            raise InvalidInputError("diffusion coefficient b must be positive")
        if self.lambda_v < 0:
            raise InvalidInputError("lambda_v must be nonnegative")
        if np.asarray(self.sensors, dtype=float).shape != (3, 3):
            raise InvalidInputError("need three 3-D sensor positions")


SPHERE_ATTRACTORS = (np.pi / 2, np.pi / 5)


def simulate_sphere(p: SphereSimParams) -> TimeSeries:
    """Elevation/azimuth pair relaxing to (pi/2, pi/5).

    ``theta_{n+1} = theta_n + c (a - theta_n) + u_n`` with ``u_n ~ N(0, b dt)``.
    """
    rng = stream(p.seed, "process", p.realization)
    noise = rng.standard_normal((p.n_samples, 2)) * (np.sqrt(p.b * p.dt) * p.noise_scale)
    a = np.asarray(SPHERE_ATTRACTORS)
    theta = np.empty((p.n_samples, 2))
    theta[0] = a if p.theta0 is None else p.theta0
    decay = 1.0 - p.c
    for n in range(p.n_samples - 1):
        theta[n + 1] = a + decay * (theta[n] - a) + noise[n]
    return TimeSeries(theta, p.dt)


def sphere_position(theta1, theta2) -> np.ndarray:
    """Point on the unit sphere at elevation ``theta1`` and azimuth ``theta2``."""
    t1 = np.asarray(theta1, dtype=float)
    t2 = np.asarray(theta2, dtype=float)
    return np.stack([np.cos(t2) * np.sin(t1), np.sin(t2) * np.sin(t1), np.cos(t1)], axis=-1)


def sensor_rates(X, sensors) -> np.ndarray:
    """Signal rates ``exp(-||s_j - x_n||)``, shape ``(T, n_sensors)``."""
    P = values_of(X)
    S = np.asarray(sensors, dtype=float)
    dist = np.linalg.norm(P[:, None, :] - S[None, :, :], axis=2)
    return np.exp(-dist)


def poisson_sensors(X, sensors, lambda_v: float, seed: int, realization: int = 0) -> TimeSeries:
    """Counts ``Pois(exp(-||s_j - x_n||)) + Pois(lambda_v)`` per sensor and step.

    Each sensor draws signal and background counts from its own named streams.
    """
    if lambda_v < 0:
        raise InvalidInputError("lambda_v must be nonnegative")
    rates = sensor_rates(X, sensors)
    T, J = rates.shape
    counts = np.empty((T, J))
    for j in range(J):
        sig = stream(seed, f"poisson_signal_{j}", realization).poisson(rates[:, j])
        bg = stream(seed, f"poisson_background_{j}", realization).poisson(lambda_v, size=T)
        counts[:, j] = sig + bg
    return TimeSeries(counts, X.dt if isinstance(X, TimeSeries) else 1.0)


def bin_histograms(C, frame: int, stride: int | None = None) -> TimeSeries:
    """Per-coordinate sums over ``frame`` consecutive samples every ``stride`` samples."""
    X = values_of(C)
    T = X.shape[0]
    stride = frame if stride is None else stride
    if frame < 1 or not 1 <= stride <= frame:
        raise InvalidInputError(f"need frame >= 1 and 1 <= stride <= frame, got {frame}, {stride}")
    if frame > T:
        raise InvalidInputError(f"frame {frame} exceeds series length {T}")
    n_out = (T - frame) // stride + 1
    csum = np.concatenate([np.zeros((1, X.shape[1])), np.cumsum(X, axis=0)])
    starts = np.arange(n_out) * stride
    out = csum[starts + frame] - csum[starts]
    if np.all(X == np.round(X)):
        out = np.round(out)  # integer counts stay exact
    dt = C.dt if isinstance(C, TimeSeries) else 1.0
    return TimeSeries(out, dt * stride)


def frame_average(Y, frame: int, stride: int | None = None) -> TimeSeries:
    """Per-frame mean, aligned with :func:`bin_histograms` output."""
    H = bin_histograms(Y, frame, stride)
    return TimeSeries(H.values / frame, H.dt)


@dataclass(frozen=True)
class LinearGaussianParams:
    """Scalar-or-vector linear-Gaussian system ``x' = A x + w``, ``z = C x + v``."""

    A: np.ndarray
    C: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    x0: np.ndarray
    n_samples: int = 100
    seed: int = 0


def simulate_linear_gaussian(p: LinearGaussianParams) -> tuple[TimeSeries, TimeSeries]:
    A, C, Q, R = (np.atleast_2d(np.asarray(a, float)) for a in (p.A, p.C, p.Q, p.R))
    x = np.atleast_1d(np.asarray(p.x0, float))
    w = stream(p.seed, "process").multivariate_normal(np.zeros(A.shape[0]), Q, size=p.n_samples)
    v = stream(p.seed, "measurement").multivariate_normal(np.zeros(C.shape[0]), R, size=p.n_samples)
    xs = np.empty((p.n_samples, A.shape[0]))
    for n in range(p.n_samples):
        x = A @ x + w[n]
        xs[n] = x
    zs = xs @ C.T + v
    return TimeSeries(xs), TimeSeries(zs)


@dataclass(frozen=True)
class PlaceCellParams:
    """Synthetic animal in a square arena with Gaussian place-field neurons."""

    n_neurons: int = 40
    duration: float = 600.0
    dt: float = 0.02  # fine simulation step (s)
    arena: float = 100.0
    speed: float = 15.0  # stationary speed scale of the velocity process (units/s)
    velocity_tau: float = 1.0  # velocity correlation time (s)
    field_width: float = 15.0
    peak_rate: float = 8.0  # Hz
    baseline_rate: float = 0.2  # Hz
    seed: int = 0
    realization: int = 0


def simulate_trajectory_2d(p: PlaceCellParams) -> tuple[np.ndarray, np.ndarray]:
    """Smooth random walk in ``[0, arena]^2`` with reflecting walls.

    Velocity is an Ornstein-Uhlenbeck process. Returns ``(times, positions)``.
    """
    rng = stream(p.seed, "trajectory", p.realization)
    n = int(round(p.duration / p.dt)) + 1
    a = np.exp(-p.dt / p.velocity_tau)
    kick = rng.standard_normal((n, 2)) * p.speed * np.sqrt(1 - a * a)
    pos = np.empty((n, 2))
    pos[0] = rng.uniform(0.25, 0.75, size=2) * p.arena
    v = kick[0].copy()
    for i in range(1, n):
        v = a * v + kick[i]
        x = pos[i - 1] + v * p.dt
        for d in range(2):
            if x[d] < 0:
                x[d], v[d] = -x[d], -v[d]
            elif x[d] > p.arena:
                x[d], v[d] = 2 * p.arena - x[d], -v[d]
        pos[i] = x
    return np.arange(n) * p.dt, pos


def simulate_place_cells(p: PlaceCellParams):
    """Poisson spike trains from neurons tuned to the simulated position.

    Returns a :class:`~dmkalman.ingest.SpikeRecording` with the trajectory attached.
    """
    from .ingest import SpikeRecording

    times, pos = simulate_trajectory_2d(p)
    rng_fields = stream(p.seed, "place_fields", p.realization)
    centers = rng_fields.uniform(0, p.arena, size=(p.n_neurons, 2))
    d2 = ((pos[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    rates = p.baseline_rate + p.peak_rate * np.exp(-d2 / (2 * p.field_width**2))
    rng = stream(p.seed, "spikes", p.realization)
    spikes = []
    for j in range(p.n_neurons):
        # one fine step is [t_i, t_i + dt); spikes placed uniformly inside it
        counts = rng.poisson(rates[:-1, j] * p.dt)
        idx = np.repeat(np.arange(counts.size), counts)
        t = times[idx] + rng.random(idx.size) * p.dt
        t = np.unique(np.minimum(t, p.duration))
        spikes.append(t)
    return SpikeRecording(
        neuron_ids=list(range(p.n_neurons)),
        spikes=spikes,
        duration=p.duration,
        position_times=times,
        position=pos,
    )
