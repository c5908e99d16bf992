"""Deterministic named random streams.

Every stream is keyed by ``(master_seed, realization, stream_name)`` through
:class:`numpy.random.SeedSequence`, so adding realizations or toggling one
noise source never perturbs the draws of another.
"""

from __future__ import annotations

import zlib

import numpy as np


def _name_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, name: str, realization: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(realization), _name_key(name)]))


def realization_seed(master_seed: int, realization: int) -> int:
    """Per-realization seed derived by counter, stable as the realization count grows."""
    ss = np.random.SeedSequence([int(master_seed), int(realization)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])
