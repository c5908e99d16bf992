"""Lossless CSV/JSON artifact I/O.

Floats are written with ``repr``, which round-trips exactly, so a stage that
reads a previous stage's CSV sees bit-identical arrays.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import DMKError, InvalidInputError


class MissingArtifactError(DMKError, FileNotFoundError):
    """A stage input file does not exist."""

    def __init__(self, path):
        super().__init__(f"missing input artifact: expected {path}")
        self.path = str(path)

    def __reduce__(self):
        return (self.__class__, (self.path,))


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_table(path, header: list[str], data) -> None:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[1] != len(header):
        raise InvalidInputError(f"{path}: {len(header)} header names for {arr.shape[1]} columns")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{path}: refusing to write non-finite values")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in arr.tolist():
            fh.write(",".join(map(repr, row)) + "\n")


def write_rows(path, header: list[str], rows) -> None:
    """Mixed-type rows (strings and numbers)."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_table(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InvalidInputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise InvalidInputError(f"{path}:{lineno}: non-numeric field") from None
    data = np.asarray(rows, dtype=float).reshape(-1, len(header))
    if not np.all(np.isfinite(data)):
        raise InvalidInputError(f"{path}: contains NaN or Inf")
    return [h.strip() for h in header], data


def columns(header: list[str], data: np.ndarray, prefix: str) -> tuple[list[str], np.ndarray]:
    idx = [i for i, h in enumerate(header) if h.startswith(prefix)]
    return [header[i][len(prefix):] for i in idx], data[:, idx]


def write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path)
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: invalid JSON: {exc}") from None
