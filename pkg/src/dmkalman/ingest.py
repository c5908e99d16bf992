"""Spike-train recordings in a neutral CSV layout and their conversion to
binned rate histograms.

Files
-----
spikes CSV    ``neuron_id,time_s`` rows sorted by neuron, then time
position CSV  ``time_s,x,y`` rows sorted by time
manifest JSON ``{"spikes": "...csv", "position": "...csv" | null,
"duration_s": float, "neuron_ids": [...], "units": {"time": "s", ...}}``
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .series import TimeSeries

log = logging.getLogger(__name__)


class SpikeFormatError(InvalidInputError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line
        self._parts = (path, line, message)

    def __reduce__(self):
        return (self.__class__, self._parts)


@dataclass
class SpikeRecording:
    neuron_ids: list[int]
    spikes: list[np.ndarray]  # one sorted array of spike times per neuron
    duration: float
    position_times: np.ndarray | None = None
    position: np.ndarray | None = None  # (P, 2)
    units: dict = field(default_factory=lambda: {"time": "s", "position": "arbitrary"})

    def __post_init__(self):
        if len(self.neuron_ids) != len(self.spikes):
            raise InvalidInputError("neuron_ids and spikes must have the same length")
        if len(set(self.neuron_ids)) != len(self.neuron_ids):
            raise InvalidInputError("duplicate neuron id")
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise InvalidInputError(f"duration must be positive, got {self.duration}")
        self.spikes = [np.asarray(s, dtype=float) for s in self.spikes]
        for nid, s in zip(self.neuron_ids, self.spikes):
            if s.size and (s[0] < 0 or s[-1] > self.duration):
                raise InvalidInputError(f"neuron {nid}: spike times outside [0, {self.duration}]")
            if np.any(np.diff(s) <= 0):
                raise InvalidInputError(f"neuron {nid}: spike times not strictly increasing")
        if (self.position is None) != (self.position_times is None):
            raise InvalidInputError("position samples and timestamps must be given together")
        if self.position is not None:
            self.position = np.asarray(self.position, dtype=float)
            self.position_times = np.asarray(self.position_times, dtype=float)
            if self.position.shape != (self.position_times.shape[0], 2):
                raise InvalidInputError("position must be (P, 2) with one timestamp per row")
            if not np.all(np.isfinite(self.position)) or not np.all(np.isfinite(self.position_times)):
                raise InvalidInputError("position contains NaN or Inf")
            if np.any(np.diff(self.position_times) < 0):
                raise InvalidInputError("position timestamps not sorted")

    @property
    def n_neurons(self) -> int:
        return len(self.neuron_ids)

    def total_spikes(self) -> int:
        return int(sum(s.size for s in self.spikes))


def _read_csv_rows(path: Path, header: list[str]):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise SpikeFormatError(path, 1, "empty file, expected a header") from None
        if [h.strip() for h in first] != header:
            raise SpikeFormatError(path, 1, f"expected header {header}, got {first}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SpikeFormatError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
            yield lineno, row


def read_spike_csv(path) -> dict[int, np.ndarray]:
    path = Path(path)
    by_neuron: dict[int, list[float]] = {}
    last = None
    for lineno, (nid_s, t_s) in _read_csv_rows(path, ["neuron_id", "time_s"]):
        try:
            nid = int(nid_s)
            t = float(t_s)
        except ValueError:
            raise SpikeFormatError(path, lineno, f"cannot parse row {nid_s!r},{t_s!r}") from None
        if not np.isfinite(t):
            raise SpikeFormatError(path, lineno, "non-finite spike time")
        if last is not None and (nid < last[0] or (nid == last[0] and t <= last[1])):
            raise InvalidInputError(f"{path}:{lineno}: rows not sorted by neuron then strictly by time")
        last = (nid, t)
        by_neuron.setdefault(nid, []).append(t)
    return {k: np.asarray(v) for k, v in by_neuron.items()}


def read_position_csv(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    rows = []
    for lineno, row in _read_csv_rows(path, ["time_s", "x", "y"]):
        try:
            rows.append([float(c) for c in row])
        except ValueError:
            raise SpikeFormatError(path, lineno, f"cannot parse row {row}") from None
    arr = np.asarray(rows, dtype=float).reshape(-1, 3)
    return arr[:, 0], arr[:, 1:]


def read_spikes(path) -> SpikeRecording:
    """Load a recording from its manifest JSON."""
    path = Path(path)
    with open(path) as fh:
        manifest = json.load(fh)
    unknown = set(manifest) - {"spikes", "position", "duration_s", "neuron_ids", "units"}
    if unknown:
        raise InvalidInputError(f"unknown manifest keys: {sorted(unknown)}")
    if "spikes" not in manifest or "duration_s" not in manifest:
        raise InvalidInputError("manifest needs 'spikes' and 'duration_s'")
    base = path.parent
    spikes = read_spike_csv(base / manifest["spikes"])
    ids = manifest.get("neuron_ids")
    if ids is None:
        ids = sorted(spikes)
    missing = set(spikes) - set(ids)
    if missing:
        raise InvalidInputError(f"spikes CSV has neurons not listed in the manifest: {sorted(missing)}")
    pos_t = pos = None
    if manifest.get("position"):
        pos_t, pos = read_position_csv(base / manifest["position"])
    return SpikeRecording(
        neuron_ids=[int(i) for i in ids],
        spikes=[spikes.get(int(i), np.empty(0)) for i in ids],
        duration=float(manifest["duration_s"]),
        position_times=pos_t,
        position=pos,
        units=manifest.get("units", {"time": "s", "position": "arbitrary"}),
    )


def write_spikes(rec: SpikeRecording, directory, stem: str = "recording") -> Path:
    """Write spikes/position CSVs plus manifest; returns the manifest path.

    Floats are written with ``repr`` so a read-back is bit-identical.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    spikes_name = f"{stem}_spikes.csv"
    with open(d / spikes_name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["neuron_id", "time_s"])
        for nid, times in sorted(zip(rec.neuron_ids, rec.spikes), key=lambda p: p[0]):
            for t in times:
                w.writerow([nid, repr(float(t))])
    pos_name = None
    if rec.position is not None:
        pos_name = f"{stem}_position.csv"
        with open(d / pos_name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time_s", "x", "y"])
            for t, (x, y) in zip(rec.position_times, rec.position):
                w.writerow([repr(float(t)), repr(float(x)), repr(float(y))])
    manifest = {
        "spikes": spikes_name,
        "position": pos_name,
        "duration_s": float(rec.duration),
        "neuron_ids": [int(i) for i in rec.neuron_ids],
        "units": rec.units,
    }
    mpath = d / f"{stem}_manifest.json"
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return mpath


def n_bins_for(duration: float, bin_size: float) -> int:
    return max(1, int(np.ceil(duration / bin_size - 1e-9)))


def bin_spikes(rec: SpikeRecording, bin_size: float) -> tuple[TimeSeries, TimeSeries | None]:
    """Spike counts per neuron over half-open bins ``[k*b, (k+1)*b)``.

    A spike exactly at the end of the recording falls in the last bin. Positions
    are averaged over the samples whose timestamps fall in each bin; a bin with
    no position sample takes the sample nearest to its centre.
    """
    if not bin_size > 0:
        raise InvalidInputError(f"bin_size must be positive, got {bin_size}")
    if rec.n_neurons == 0:
        raise InvalidInputError("recording has no neurons")
    n_bins = n_bins_for(rec.duration, bin_size)
    counts = np.zeros((n_bins, rec.n_neurons))
    for j, times in enumerate(rec.spikes):
        idx = np.minimum(np.floor(times / bin_size).astype(int), n_bins - 1)
        counts[:, j] = np.bincount(idx, minlength=n_bins)
    empty = int(np.sum(counts.sum(axis=1) == 0))
    if empty:
        log.warning("%d of %d bins have no spikes from any neuron; consider a larger bin", empty, n_bins)
    hist = TimeSeries(counts, bin_size)

    if rec.position is None:
        return hist, None
    pidx = np.minimum(np.floor(rec.position_times / bin_size).astype(int), n_bins - 1)
    valid = pidx >= 0
    sums = np.zeros((n_bins, 2))
    np.add.at(sums, pidx[valid], rec.position[valid])
    n_in = np.bincount(pidx[valid], minlength=n_bins)
    pos = np.empty((n_bins, 2))
    has = n_in > 0
    pos[has] = sums[has] / n_in[has, None]
    if np.any(~has):
        centers = (np.flatnonzero(~has) + 0.5) * bin_size
        nearest = np.abs(rec.position_times[None, :] - centers[:, None]).argmin(axis=1)
        pos[~has] = rec.position[nearest]
    return hist, TimeSeries(pos, bin_size)
