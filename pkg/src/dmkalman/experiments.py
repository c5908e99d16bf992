"""Experiment stages: simulate -> embed -> filter -> metrics.

Each stage reads the previous stage's files from the run directory and writes
its own, so running the stages one at a time gives exactly the same artifacts
as a full run. Work is split into units, one per (grid point, realization);
units run in a process pool and results are always gathered in unit order.

Run directory layout::

    config.json  manifest.json
    units/<point>/rNNN/raw.csv, embedding.csv, embedding.json, model.json,
                       observability.json, filtered_<algorithm>.csv ...
    metrics/<point>/<algorithm>.json
    plot_data.csv  [armse_curves.csv]
"""

from __future__ import annotations

import datetime as _dt
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import uniform_filter1d

from . import artifacts, baselines, config as cfgmod, diffusion, dmk, ingest, metrics, model as modelmod, sims
from .artifacts import columns, read_json, read_table, write_json, write_table
from .diffusion import Embedding
from .errors import InvalidInputError, NumericalDegeneracyError
from .pipeline import EmbeddingParams, build_embedding

log = logging.getLogger(__name__)

STAGES = ("simulate", "embed", "filter", "metrics")
OUTPUT_ROOT_ENV = "DMK_OUTPUT_ROOT"


def code_version() -> str:
    from . import __version__

    return __version__


@dataclass(frozen=True)
class Unit:
    point: str  # directory label of the grid point
    value: float | None  # grid value (SNR or c); None when there is no sweep
    realization: int

    def dir(self, root: Path) -> Path:
        return root / "units" / self.point / f"r{self.realization:03d}"


def grid(cfg: dict) -> tuple[str | None, list[float]]:
    kind = cfg["kind"]
    if kind == "polar":
        return "snr", [float(v) for v in cfg["simulator"]["snr"]]
    if kind == "sphere":
        return "c", [float(v) for v in cfg["simulator"]["c"]]
    return None, [None]


def point_label(name: str | None, value: float | None) -> str:
    return "default" if name is None else f"{name}_{value!r}"


def units(cfg: dict) -> list[Unit]:
    name, values = grid(cfg)
    return [Unit(point_label(name, v), v, r) for v in values for r in range(cfg["realizations"])]


def default_output_dir(cfg: dict) -> Path:
    if cfg.get("output_dir"):
        return Path(cfg["output_dir"])
    root = os.environ.get(OUTPUT_ROOT_ENV, "dmk-runs")
    return Path(root) / cfg["name"]


def _pmap(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _embedding_params(cfg: dict) -> EmbeddingParams:
    p = cfg["pipeline"]
    return EmbeddingParams(
        window=p["window"],
        epsilon_multiplier=float(p["epsilon_multiplier"]),
        epsilon_reference=p["epsilon_reference"],
        k=p["k"],
    )


# ---------------------------------------------------------------- artifacts


def write_raw(path: Path, times, groups: list[tuple[str, list[str], np.ndarray]]) -> None:
    header = ["time"]
    blocks = [np.asarray(times, float)[:, None]]
    for prefix, names, arr in groups:
        header += [f"{prefix}{n}" for n in names]
        blocks.append(np.asarray(arr, float).reshape(len(times), -1))
    write_table(path, header, np.hstack(blocks))


def read_raw(path: Path) -> dict:
    header, data = read_table(path)
    if not header or header[0] != "time":
        raise InvalidInputError(f"{path}: first column must be 'time'")
    out = {"time": data[:, 0]}
    for prefix in ("state_", "clean_", "z_", "target_"):
        names, arr = columns(header, data, prefix)
        out[prefix[:-1]] = (names, arr)
    if not out["z"][0]:
        raise InvalidInputError(f"{path}: no measurement columns (z_*)")
    return out


def write_embedding(directory: Path, stem: str, times, emb: Embedding) -> None:
    write_table(directory / f"{stem}.csv", ["time"] + [f"psi_{i}" for i in range(emb.k + 1)], np.column_stack([times, emb.psi]))
    side = {"epsilon": emb.epsilon, "mu": emb.mu.tolist(), "lam": emb.lam.tolist(), "k": emb.k, "n_samples": emb.n_samples}
    if emb.k >= 3:
        side["spectral_gap_k"] = diffusion.spectral_gap(emb.mu)
    write_json(directory / f"{stem}.json", side)


def read_embedding(directory: Path, stem: str) -> Embedding:
    side = read_json(directory / f"{stem}.json")
    header, data = read_table(directory / f"{stem}.csv")
    _, psi = columns(header, data, "psi_")
    return Embedding(float(side["epsilon"]), np.asarray(side["mu"], float), np.asarray(side["lam"], float), psi)


def write_model(directory: Path, stem: str, m: modelmod.LinearSystemModel) -> None:
    write_json(directory / f"{stem}.json", m.to_dict())


def read_model(path: Path) -> modelmod.LinearSystemModel:
    return modelmod.LinearSystemModel.from_dict(read_json(path))


def write_filtered(path: Path, times, parts: list[tuple[str, list[str], np.ndarray]]) -> None:
    write_raw(path, times, parts)


def read_filtered(path: Path) -> dict:
    header, data = read_table(path)
    out = {}
    for prefix in ("psi_hat_", "state_hat_", "z_hat_", "coord_"):
        names, arr = columns(header, data, prefix)
        if names:
            out[prefix[:-1]] = arr
    return out


def _dmk_parts(psi_hat, z_hat, z_names):
    k = psi_hat.shape[1]
    return [("psi_hat_", [str(i + 1) for i in range(k)], psi_hat), ("z_hat_", z_names, z_hat)]


def _coord_parts(X):
    return [("coord_", [str(i + 1) for i in range(X.shape[1])], X)]


# ---------------------------------------------------------------- simulate


def _simulate_polar(cfg: dict, u: Unit, d: Path) -> None:
    s = cfg["simulator"]
    th = sims.simulate_double_well(
        sims.PolarSimParams(
            n_samples=s["n_samples"],
            dt=float(s["dt"]),
            theta0=tuple(float(v) for v in s["theta0"]),
            centers=tuple(float(v) for v in s["centers"]),
            seed=cfg["seed"],
            realization=u.realization,
        )
    )
    clean = sims.polar_measure(th.values)
    # one state path per realization, shared by every SNR; noise differs per SNR
    Z = sims.add_gaussian_noise(clean, u.value, cfg["seed"], u.realization, name=f"measurement_snr_{u.value!r}")
    names = ["phi", "r"]
    write_raw(d / "raw.csv", th.times, [("state_", ["1", "2"], th.values), ("clean_", names, clean), ("z_", names, Z.values)])


def _simulate_sphere(cfg: dict, u: Unit, d: Path) -> None:
    s = cfg["simulator"]
    p = sims.SphereSimParams(
        n_samples=s["n_samples"],
        dt=float(s["dt"]),
        c=u.value,
        b=float(s["b"]),
        lambda_v=float(s["lambda_v"]),
        seed=cfg["seed"],
        realization=u.realization,
    )
    th = sims.simulate_sphere(p)
    X = sims.sphere_position(th.values[:, 0], th.values[:, 1])
    counts = sims.poisson_sensors(X, p.sensors, p.lambda_v, cfg["seed"], u.realization)
    hist = sims.bin_histograms(counts, s["frame"])
    truth = sims.frame_average(th, s["frame"])
    times = np.arange(len(hist)) * hist.dt
    write_raw(
        d / "raw.csv",
        times,
        [("target_", ["theta1", "theta2"], truth.values), ("z_", [str(j + 1) for j in range(hist.dim)], hist.values)],
    )


def _simulate_spikes(cfg: dict, u: Unit, d: Path) -> None:
    s = cfg["simulator"]
    if s["source"] == "synthetic":
        rec = sims.simulate_place_cells(
            sims.PlaceCellParams(
                n_neurons=s["n_neurons"],
                duration=float(s["duration"]),
                dt=float(s["dt"]),
                arena=float(s["arena"]),
                speed=float(s["speed"]),
                velocity_tau=float(s["velocity_tau"]),
                field_width=float(s["field_width"]),
                peak_rate=float(s["peak_rate"]),
                baseline_rate=float(s["baseline_rate"]),
                seed=cfg["seed"],
                realization=u.realization,
            )
        )
        manifest = ingest.write_spikes(rec, d, "recording")
    else:
        manifest = Path(s["source"])
    # always go through the file reader so synthetic and recorded data share one path
    rec = ingest.read_spikes(manifest)
    hist, pos = ingest.bin_spikes(rec, float(s["bin_size"]))
    if pos is None:
        raise InvalidInputError(f"{manifest}: recording has no position trace to decode")
    times = np.arange(len(hist)) * hist.dt
    write_raw(
        d / "raw.csv",
        times,
        [("target_", ["x", "y"], pos.values), ("z_", [str(i) for i in rec.neuron_ids], hist.values)],
    )


def _simulate_custom(cfg: dict, u: Unit, d: Path) -> None:
    src = read_raw(Path(cfg["simulator"]["input"]))
    groups = [(f"{key}_", *src[key]) for key in ("state", "clean", "z", "target") if src[key][0]]
    write_raw(d / "raw.csv", src["time"], groups)


_SIMULATORS = {"polar": _simulate_polar, "sphere": _simulate_sphere, "spikes": _simulate_spikes, "custom": _simulate_custom}


# ---------------------------------------------------------------- embed


def _embed_unit(cfg: dict, u: Unit, d: Path) -> None:
    raw = read_raw(d / "raw.csv")
    params = _embedding_params(cfg)
    write_embedding(d, "embedding", raw["time"], build_embedding(raw["z"][1], params))
    if cfg["kind"] == "polar" and cfg["baselines"]["clean_dynamics"]:
        write_embedding(d, "embedding_clean", raw["time"], build_embedding(raw["clean"][1], params))


# ---------------------------------------------------------------- filter


def _observer_gamma(H: np.ndarray, g: float) -> float:
    # gains are relative to the squared spectral norm of H, which bounds the
    # largest stable step of the gradient-style correction
    s = float(np.linalg.norm(H, 2)) ** 2
    return g / s if s > 0 else 0.0


def _filter_unit(cfg: dict, u: Unit, d: Path) -> None:
    raw = read_raw(d / "raw.csv")
    times = raw["time"]
    z_names, Z = raw["z"]
    dt = float(cfg["pipeline"]["model_dt"])
    emb = read_embedding(d, "embedding")
    m = modelmod.assemble_model(emb, Z, dt)
    write_model(d, "model", m)
    write_json(d / "observability.json", modelmod.observability_report(m).to_dict())
    psi_hat, z_hat = dmk.run(Z, m)
    write_filtered(d / "filtered_dmk.csv", times, _dmk_parts(psi_hat.values, z_hat.values, z_names))

    kind, b = cfg["kind"], cfg["baselines"]
    if kind == "polar":
        if b["clean_dynamics"]:
            clean_emb = read_embedding(d, "embedding_clean")
            mc = modelmod.assemble_model(emb.with_rates(clean_emb.mu, clean_emb.lam), Z, dt)
            write_model(d, "model_clean_dynamics", mc)
            psi_c, z_c = dmk.run(Z, mc)
            write_filtered(d / "filtered_dmk_clean_dynamics.csv", times, _dmk_parts(psi_c.values, z_c.values, z_names))
        if b["particle_filter"]:
            state, z_pf = _run_polar_pf(cfg, u, raw)
            write_filtered(
                d / "filtered_pf.csv", times, [("state_hat_", ["1", "2"], state), ("z_hat_", z_names, z_pf)]
            )
    elif kind == "sphere":
        if b["diffusion_maps"]:
            write_filtered(d / "filtered_dm.csv", times, _coord_parts(emb.coords))
        if b["observer"]:
            status = {}
            for g in b["observer_gains"]:
                label = f"observer_g{float(g)!r}"
                gamma = _observer_gamma(m.H, float(g))
                try:
                    est = baselines.linear_observer(Z, m, gamma)
                except NumericalDegeneracyError as exc:
                    status[label] = {"gain": float(g), "gamma": gamma, "diverged": True, "step": exc.step}
                    continue
                status[label] = {"gain": float(g), "gamma": gamma, "diverged": False, "step": None}
                write_filtered(d / f"filtered_{label}.csv", times, _coord_parts(est.values))
            write_json(d / "observer_runs.json", status)
    elif kind == "spikes":
        if b["diffusion_maps"]:
            write_filtered(d / "filtered_dm.csv", times, _coord_parts(emb.coords))
        if b["pca"]:
            write_filtered(d / "filtered_pca.csv", times, _coord_parts(baselines.pca_embed(Z, b["pca_k"]).values))


def _run_polar_pf(cfg: dict, u: Unit, raw: dict):
    s = cfg["simulator"]
    dt = float(s["dt"])
    centers = np.asarray(s["centers"], float)
    theta0 = np.asarray(s["theta0"], float)
    Z = raw["z"][1]
    sd = sims.noise_std_for_snr(raw["clean"][1], u.value)
    inv_var = 1.0 / sd**2

    def dyn(p, rng):
        return p + dt * sims.double_well_drift(p, centers) + np.sqrt(2 * dt) * rng.standard_normal(p.shape)

    def loglik(z, p):
        r = z - sims.polar_measure(p)
        return -0.5 * (r**2 @ inv_var)

    def init(n, rng):
        return np.tile(theta0, (n, 1))

    state, z_hat = baselines.particle_filter(
        Z, dyn, loglik, init, sims.polar_measure, cfg["baselines"]["n_particles"], cfg["seed"], u.realization
    )
    return state.values, z_hat.values


# ---------------------------------------------------------------- metrics


def _smoothed_plateau(curve: np.ndarray, mcfg: dict) -> int:
    sm = uniform_filter1d(curve, size=mcfg["plateau_smoothing"], mode="nearest")
    return metrics.plateau_step(sm, frac=float(mcfg["plateau_tolerance"]), tail=float(mcfg["plateau_tail"]))


def _polar_metrics(cfg: dict, pt_units: list[Unit], root: Path, meta: dict) -> dict[str, metrics.MetricReport]:
    b = cfg["baselines"]
    algs = ["measurements", "dmk"] + (["dmk_clean_dynamics"] if b["clean_dynamics"] else []) + (["pf"] if b["particle_filter"] else [])
    est = {a: [] for a in algs}
    truth = []
    for u in pt_units:
        d = u.dir(root)
        raw = read_raw(d / "raw.csv")
        truth.append(raw["clean"][1])
        est["measurements"].append(raw["z"][1])
        for a in algs[1:]:
            est[a].append(read_filtered(d / f"filtered_{a}.csv")["z_hat"])
    reports = {}
    for a in algs:
        curve = metrics.armse(est[a], truth)
        reports[a] = metrics.MetricReport(
            algorithm=a,
            nrmse=np.array([metrics.nrmse(e, t) for e, t in zip(est[a], truth)]),
            armse=curve,
            metadata=dict(meta, coordinates=["phi", "r"], plateau_step=_smoothed_plateau(curve, cfg["metrics"])),
        )
    return reports


def _even_indices(n: int, count: int) -> np.ndarray:
    return np.unique(np.linspace(0, n - 1, count).round().astype(int))


def _correlations(features: np.ndarray, target: np.ndarray, train_idx) -> np.ndarray:
    return np.array([metrics.regression_correlation(features, target[:, j], train_idx) for j in range(target.shape[1])])


# fixed-gain stand-in, reported under this name so it is not mistaken for a published observer
OBSERVER_LABEL = "observer (reimplementation)"


def _sphere_metrics(cfg: dict, pt_units: list[Unit], root: Path, meta: dict) -> dict[str, metrics.MetricReport]:
    b = cfg["baselines"]
    n_reg = cfg["metrics"]["regression_samples"]
    rows: dict[str, list] = {"dmk": []}
    if b["diffusion_maps"]:
        rows["dm"] = []
    gain_labels = [f"observer_g{float(g)!r}" for g in b["observer_gains"]] if b["observer"] else []
    diverged = {g: False for g in gain_labels}
    for g in gain_labels:
        rows[g] = []
    for u in pt_units:
        d = u.dir(root)
        raw = read_raw(d / "raw.csv")
        target = raw["target"][1]
        idx = _even_indices(len(target), n_reg)
        rows["dmk"].append(_correlations(read_filtered(d / "filtered_dmk.csv")["psi_hat"], target, idx))
        if b["diffusion_maps"]:
            rows["dm"].append(_correlations(read_filtered(d / "filtered_dm.csv")["coord"], target, idx))
        if gain_labels:
            status = read_json(d / "observer_runs.json")
            for g in gain_labels:
                if status[g]["diverged"]:
                    diverged[g] = True
                elif not diverged[g]:
                    rows[g].append(_correlations(read_filtered(d / f"filtered_{g}.csv")["coord"], target, idx))
    coords = ["theta1", "theta2"]
    reports = {a: metrics.MetricReport(a, correlations=np.array(rows[a]), metadata=dict(meta, coordinates=coords)) for a in ("dmk", "dm") if a in rows}
    usable = [g for g in gain_labels if not diverged[g]]
    for g in gain_labels:
        if not diverged[g]:
            reports[g] = metrics.MetricReport(g, correlations=np.array(rows[g]), metadata=dict(meta, coordinates=coords, label=OBSERVER_LABEL))
    if usable:
        # the observer is reported at its best gain, chosen per grid point
        best = max(usable, key=lambda g: (float(np.mean(rows[g])), -usable.index(g)))
        reports["observer"] = metrics.MetricReport(
            "observer",
            correlations=np.array(rows[best]),
            metadata=dict(meta, coordinates=coords, label=OBSERVER_LABEL, selected=best, diverged=[g for g in gain_labels if diverged[g]]),
        )
    return reports


def _spikes_metrics(cfg: dict, pt_units: list[Unit], root: Path, meta: dict) -> dict[str, metrics.MetricReport]:
    b = cfg["baselines"]
    folds = cfg["metrics"]["folds"]
    sources = {"dmk": ("filtered_dmk.csv", "psi_hat")}
    if b["diffusion_maps"]:
        sources["dm"] = ("filtered_dm.csv", "coord")
    if b["pca"]:
        sources["pca"] = ("filtered_pca.csv", "coord")
    rows = {a: [] for a in sources}
    for u in pt_units:
        d = u.dir(root)
        target = read_raw(d / "raw.csv")["target"][1]
        splits = metrics.kfold_consecutive(len(target), folds)
        for a, (fname, key) in sources.items():
            F = read_filtered(d / fname)[key]
            per_fold = [[metrics.regression_correlation(F, target[:, j], tr, te) for j in range(target.shape[1])] for tr, te in splits]
            rows[a].append(np.mean(per_fold, axis=0))
    return {
        a: metrics.MetricReport(a, correlations=np.array(rows[a]), metadata=dict(meta, coordinates=["x", "y"], folds=folds))
        for a in sources
    }


def _custom_metrics(cfg: dict, pt_units: list[Unit], root: Path, meta: dict) -> dict[str, metrics.MetricReport]:
    est = {"measurements": [], "dmk": []}
    truth = []
    names = None
    for u in pt_units:
        d = u.dir(root)
        raw = read_raw(d / "raw.csv")
        if not raw["clean"][0]:
            return {"dmk": metrics.MetricReport("dmk", metadata=dict(meta, note="no clean_* columns; nothing to score"))}
        names = raw["clean"][0]
        truth.append(raw["clean"][1])
        est["measurements"].append(raw["z"][1])
        est["dmk"].append(read_filtered(d / "filtered_dmk.csv")["z_hat"])
    return {
        a: metrics.MetricReport(
            a,
            nrmse=np.array([metrics.nrmse(e, t) for e, t in zip(est[a], truth)]),
            armse=metrics.armse(est[a], truth),
            metadata=dict(meta, coordinates=names),
        )
        for a in est
    }


_METRICS = {"polar": _polar_metrics, "sphere": _sphere_metrics, "spikes": _spikes_metrics, "custom": _custom_metrics}


def _plot_rows(grid_name, value, reports: dict[str, metrics.MetricReport]) -> list[list]:
    rows = []
    for a, rep in reports.items():
        coords = rep.metadata.get("coordinates", [])
        for metric, arr in (("nrmse", rep.nrmse), ("correlation", rep.correlations)):
            if arr is None:
                continue
            arr = np.asarray(arr)
            for j, name in enumerate(coords):
                rows.append([grid_name or "none", "" if value is None else value, a, metric, name, arr[:, j].mean(), arr[:, j].std()])
    return rows


def stage_metrics(cfg: dict, root: Path) -> None:
    h = cfgmod.config_hash(cfg)
    grid_name, values = grid(cfg)
    all_units = units(cfg)
    plot_rows = []
    curves = []
    for v in values:
        label = point_label(grid_name, v)
        pt_units = [u for u in all_units if u.point == label]
        meta = {"seed": cfg["seed"], "config_hash": h, "grid": grid_name, "grid_value": v}
        reports = _METRICS[cfg["kind"]](cfg, pt_units, root, meta)
        for a, rep in reports.items():
            write_json(root / "metrics" / label / f"{a}.json", rep.to_dict())
            if rep.armse is not None:
                curves.append((f"{a}@{label}", rep.armse))
        plot_rows += _plot_rows(grid_name, v, reports)
    artifacts.write_rows(root / "plot_data.csv", ["grid", "value", "algorithm", "metric", "coordinate", "mean", "std"], plot_rows)
    if curves:
        n = len(curves[0][1])
        write_table(root / "armse_curves.csv", ["step"] + [c[0] for c in curves], np.column_stack([np.arange(n)] + [c[1] for c in curves]))


# ---------------------------------------------------------------- driver


def _unit_task(args) -> None:
    stage, cfg, u, root = args
    d = u.dir(root)
    if stage == "simulate":
        d.mkdir(parents=True, exist_ok=True)
        _SIMULATORS[cfg["kind"]](cfg, u, d)
    elif stage == "embed":
        _embed_unit(cfg, u, d)
    elif stage == "filter":
        _filter_unit(cfg, u, d)


def write_run_header(cfg: dict, root: Path) -> None:
    root.mkdir(parents=True, exist_ok=True)
    write_json(root / "config.json", cfgmod.semantic_view(cfg) | {"name": cfg["name"]})
    write_json(
        root / "manifest.json",
        {
            "config_hash": cfgmod.config_hash(cfg),
            "seed": cfg["seed"],
            "kind": cfg["kind"],
            "realizations": cfg["realizations"],
            "version": code_version(),
            "seed_scheme": "SeedSequence([seed, realization, crc32(stream_name)])",
            "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        },
    )


def load_run_config(root: Path) -> dict:
    return cfgmod.normalize(read_json(root / "config.json"))


def run_stage(stage: str, cfg: dict, root: Path, workers: int = 1) -> None:
    if stage not in STAGES:
        raise InvalidInputError(f"unknown stage '{stage}', expected one of {STAGES}")
    log.info("stage %s: %s", stage, root)
    if stage == "simulate":
        write_run_header(cfg, root)
    if stage == "metrics":
        stage_metrics(cfg, root)
        return
    _pmap(_unit_task, [(stage, cfg, u, root) for u in units(cfg)], workers)


def run_experiment(cfg: dict, root: Path, workers: int = 1) -> Path:
    for stage in STAGES:
        run_stage(stage, cfg, root, workers)
    return root


def load_report(root: Path, point: str, algorithm: str) -> dict:
    return read_json(Path(root) / "metrics" / point / f"{algorithm}.json")

