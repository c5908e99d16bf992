"""Declarative experiment configuration.

A config is a YAML (or JSON) mapping. Every section is checked against a fixed
set of keys, so typos fail loudly instead of silently falling back to defaults.
Defaults are filled in before hashing, so writing a default value explicitly
does not change the config hash.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import yaml

from .errors import InvalidInputError

KINDS = ("polar", "sphere", "spikes", "custom")

_SIMULATOR_DEFAULTS = {
    "polar": {
        "n_samples": 1000,
        "dt": 0.01,
        "theta0": [1.0, 6.0],
        "centers": [1.0, 6.0],
        "snr": [0.25, 0.5, 1.0, 2.0, 4.0],
    },
    "sphere": {
        "n_samples": 30000,
        "dt": 0.5,
        "c": [0.1, 0.5, 1.0],
        "b": 0.01,
        "lambda_v": 0.1,
        "frame": 60,
    },
    "spikes": {
        "source": "synthetic",  # or a path to a recording manifest JSON
        "n_neurons": 40,
        "duration": 600.0,
        "dt": 0.02,
        "arena": 100.0,
        "speed": 15.0,
        "velocity_tau": 1.0,
        "field_width": 15.0,
        "peak_rate": 8.0,
        "baseline_rate": 0.2,
        "bin_size": 1.0,
    },
    "custom": {
        "input": None,  # CSV with a time column, z_* columns and optional clean_* / target_* columns
    },
}

_PIPELINE_DEFAULTS = {
    "polar": {"window": 30, "epsilon_multiplier": 1.0, "epsilon_reference": "kernel", "k": 2, "model_dt": 0.01},
    "sphere": {"window": 20, "epsilon_multiplier": 1.0, "epsilon_reference": "euclidean", "k": 3, "model_dt": 0.5},
    "spikes": {"window": 15, "epsilon_multiplier": 3.0, "epsilon_reference": "kernel", "k": 20, "model_dt": 1.0},
    "custom": {"window": 30, "epsilon_multiplier": 1.0, "epsilon_reference": "kernel", "k": 2, "model_dt": 1.0},
}

_BASELINE_DEFAULTS = {
    "polar": {"particle_filter": True, "n_particles": 1000, "clean_dynamics": True},
    "sphere": {"diffusion_maps": True, "observer": True, "observer_gains": [0.03, 0.1, 0.3, 1.0]},
    "spikes": {"diffusion_maps": True, "pca": True, "pca_k": 20},
    "custom": {},
}

_METRIC_DEFAULTS = {
    "polar": {"plateau_tolerance": 0.10, "plateau_tail": 0.25, "plateau_smoothing": 5},
    "sphere": {"regression_samples": 100},
    "spikes": {"folds": 5},
    "custom": {},
}

_TOP_KEYS = {"kind", "name", "seed", "realizations", "output_dir", "simulator", "pipeline", "baselines", "metrics"}
# keys that do not affect results and are therefore left out of the hash
_NON_SEMANTIC = {"output_dir", "name"}


def _merge_section(kind: str, section: str, given, defaults: dict) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise InvalidInputError(f"{section} must be a mapping")
    unknown = set(given) - set(defaults)
    if unknown:
        raise InvalidInputError(f"unknown {section} keys for kind '{kind}': {sorted(unknown)}")
    out = copy.deepcopy(defaults)
    out.update(copy.deepcopy(given))
    return out


def _positive(section: dict, key: str, where: str, integer: bool = False):
    v = section[key]
    ok = isinstance(v, int) and not isinstance(v, bool) if integer else isinstance(v, (int, float)) and not isinstance(v, bool)
    if not ok or not v > 0:
        raise InvalidInputError(f"{where}.{key} must be a positive {'integer' if integer else 'number'}, got {v!r}")


def _positive_list(section: dict, key: str, where: str):
    v = section[key]
    if not isinstance(v, list) or not v or not all(isinstance(x, (int, float)) and not isinstance(x, bool) and x > 0 for x in v):
        raise InvalidInputError(f"{where}.{key} must be a non-empty list of positive numbers, got {v!r}")
    if len(set(v)) != len(v):
        raise InvalidInputError(f"{where}.{key} has duplicate entries")


def normalize(raw: dict) -> dict:
    """Fill defaults and validate; returns a new dict."""
    if not isinstance(raw, dict):
        raise InvalidInputError("config must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise InvalidInputError(f"unknown top-level config keys: {sorted(unknown)}")
    kind = raw.get("kind")
    if kind not in KINDS:
        raise InvalidInputError(f"kind must be one of {KINDS}, got {kind!r}")
    cfg = {
        "kind": kind,
        "name": raw.get("name", kind),
        "seed": raw.get("seed", 0),
        "realizations": raw.get("realizations", 1),
        "output_dir": raw.get("output_dir"),
        "simulator": _merge_section(kind, "simulator", raw.get("simulator"), _SIMULATOR_DEFAULTS[kind]),
        "pipeline": _merge_section(kind, "pipeline", raw.get("pipeline"), _PIPELINE_DEFAULTS[kind]),
        "baselines": _merge_section(kind, "baselines", raw.get("baselines"), _BASELINE_DEFAULTS[kind]),
        "metrics": _merge_section(kind, "metrics", raw.get("metrics"), _METRIC_DEFAULTS[kind]),
    }
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    seed = cfg["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise InvalidInputError(f"seed must be a nonnegative integer, got {seed!r}")
    _positive(cfg, "realizations", "config", integer=True)
    if not isinstance(cfg["name"], str) or not cfg["name"]:
        raise InvalidInputError("name must be a non-empty string")

    p = cfg["pipeline"]
    for key in ("window", "k"):
        _positive(p, key, "pipeline", integer=True)
    if p["window"] < 2:
        raise InvalidInputError(f"pipeline.window must be >= 2, got {p['window']}")
    _positive(p, "epsilon_multiplier", "pipeline")
    _positive(p, "model_dt", "pipeline")
    if p["epsilon_reference"] not in ("kernel", "euclidean"):
        raise InvalidInputError("pipeline.epsilon_reference must be 'kernel' or 'euclidean'")

    kind, s, b, m = cfg["kind"], cfg["simulator"], cfg["baselines"], cfg["metrics"]
    n_frames = None
    if kind == "polar":
        _positive(s, "n_samples", "simulator", integer=True)
        _positive(s, "dt", "simulator")
        _positive_list(s, "snr", "simulator")
        for key in ("theta0", "centers"):
            v = s[key]
            if not isinstance(v, list) or len(v) != 2 or not all(isinstance(x, (int, float)) for x in v):
                raise InvalidInputError(f"simulator.{key} must be a pair of numbers")
        _positive(b, "n_particles", "baselines", integer=True)
        if b["n_particles"] < 10:
            raise InvalidInputError("baselines.n_particles must be >= 10")
        for key in ("plateau_tolerance", "plateau_tail"):
            _positive(m, key, "metrics")
        _positive(m, "plateau_smoothing", "metrics", integer=True)
        n_frames = s["n_samples"]
    elif kind == "sphere":
        for key in ("n_samples", "frame"):
            _positive(s, key, "simulator", integer=True)
        for key in ("dt", "b", "lambda_v"):
            _positive(s, key, "simulator")
        _positive_list(s, "c", "simulator")
        if b["observer"]:
            _positive_list(b, "observer_gains", "baselines")
        _positive(m, "regression_samples", "metrics", integer=True)
        n_frames = s["n_samples"] // s["frame"]
        if m["regression_samples"] > n_frames:
            raise InvalidInputError("metrics.regression_samples exceeds the number of histograms")
    elif kind == "spikes":
        if s["source"] != "synthetic" and not isinstance(s["source"], str):
            raise InvalidInputError("simulator.source must be 'synthetic' or a manifest path")
        _positive(s, "n_neurons", "simulator", integer=True)
        for key in ("duration", "dt", "arena", "speed", "velocity_tau", "field_width", "peak_rate", "bin_size"):
            _positive(s, key, "simulator")
        if not s["baseline_rate"] >= 0:
            raise InvalidInputError("simulator.baseline_rate must be >= 0")
        _positive(b, "pca_k", "baselines", integer=True)
        _positive(m, "folds", "metrics", integer=True)
        if m["folds"] < 2:
            raise InvalidInputError("metrics.folds must be >= 2")
        if s["source"] == "synthetic":
            n_frames = int(-(-s["duration"] // s["bin_size"]))
            if b["pca"] and b["pca_k"] > s["n_neurons"]:
                raise InvalidInputError("baselines.pca_k exceeds the number of neurons")
    elif kind == "custom":
        if not isinstance(s["input"], str) or not s["input"]:
            raise InvalidInputError("simulator.input must name a measurement CSV")
    if n_frames is not None:
        if p["window"] > n_frames:
            raise InvalidInputError(f"pipeline.window={p['window']} exceeds the series length {n_frames}")
        if p["k"] + 1 > n_frames:
            raise InvalidInputError(f"pipeline.k={p['k']} too large for {n_frames} samples")


def load(path, seed_override: int | None = None) -> dict:
    path = Path(path)
    text = path.read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InvalidInputError(f"{path}: cannot parse config: {exc}") from None
    if seed_override is not None:
        if not isinstance(raw, dict):
            raise InvalidInputError("config must be a mapping")
        raw = dict(raw, seed=seed_override)
    cfg = normalize(raw)
    # relative input paths resolve against the config file's directory
    for key in ("input", "source"):
        v = cfg["simulator"].get(key)
        if isinstance(v, str) and v != "synthetic" and not Path(v).is_absolute():
            cfg["simulator"][key] = str((path.parent / v).resolve())
    return cfg


def semantic_view(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in _NON_SEMANTIC}


def _canonical(v):
    # 1 and 1.0 mean the same thing in every numeric field
    if isinstance(v, dict):
        return {k: _canonical(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_canonical(x) for x in v]
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    return v


def config_hash(cfg: dict) -> str:
    blob = json.dumps(_canonical(semantic_view(cfg)), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def bundled_config_path(name: str) -> Path:
    p = Path(__file__).parent / "configs" / f"{name}.yaml"
    if not p.exists():
        raise InvalidInputError(f"no bundled config named '{name}'")
    return p
