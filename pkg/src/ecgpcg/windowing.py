"""
Supervised (input window, target sample) pairs and cross-validation splits.

A target sample y(t) is paired with the input samples x(tau) for
t1 <= tau <= t2, where the interval depends on the temporal scheme:

========== ==================
Causal     [t - dt, t]
AntiCausal [t, t + dt]
NonCausal  [t - dt, t + dt]
========== ==================

Windows include both endpoints, so an input holds ``round(dt * fs) + 1``
samples (``2 * round(dt * fs) + 1`` for the non-causal scheme).
"""

import enum
import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (EmptyDataset, IoFailure, LengthMismatch, MalformedFile,
                     RecordTooShort, TooFewRecords)

__all__ = [
    "WindowKind", "WindowScheme", "Direction", "TargetKind", "WindowedDataset",
    "Protocol", "SplitPlan", "window_bounds", "build_dataset",
    "within_subject_folds", "cross_subject_splits", "evaluation_mask",
    "write_dataset", "read_dataset", "concat_datasets", "LazyRows",
]

DEFAULT_STRIDE_S = 0.008


class WindowKind(str, enum.Enum):
    CAUSAL = "Causal"
    ANTI_CAUSAL = "AntiCausal"
    NON_CAUSAL = "NonCausal"


class Direction(str, enum.Enum):
    ECG_TO_PCG = "EcgToPcg"
    PCG_TO_ECG = "PcgToEcg"

    @property
    def source(self):
        return "ecg" if self is Direction.ECG_TO_PCG else "pcg"

    @property
    def target(self):
        return "pcg" if self is Direction.ECG_TO_PCG else "ecg"


class TargetKind(str, enum.Enum):
    RAW_WAVEFORM = "RawWaveform"
    ENVELOPE = "Envelope"


class Protocol(str, enum.Enum):
    WITHIN_SUBJECT_10FOLD = "WithinSubject10Fold"
    CROSS_SUBJECT_LOOCV = "CrossSubjectLOOCV"


@dataclass(frozen=True)
class WindowScheme:
    kind: WindowKind = WindowKind.NON_CAUSAL
    delta_t_s: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "kind", WindowKind(self.kind))
        if not self.delta_t_s > 0:
            raise ValueError("delta_t_s must be positive")

    def half_samples(self, fs):
        return int(round(self.delta_t_s * fs))

    def input_len(self, fs):
        n = self.half_samples(fs)
        return 2 * n + 1 if self.kind is WindowKind.NON_CAUSAL else n + 1

    def start_offset(self, fs):
        """Offset (samples) of the first window sample relative to the target."""
        return 0 if self.kind is WindowKind.ANTI_CAUSAL else -self.half_samples(fs)

    def target_position(self, fs):
        """Index of the target time inside its own window."""
        return -self.start_offset(fs)

    def to_dict(self):
        return {"kind": self.kind.value, "delta_t_s": self.delta_t_s}


def window_bounds(t, scheme):
    """Input interval ``(t1, t2)`` in seconds for a target at time ``t``."""
    dt = scheme.delta_t_s
    if scheme.kind is WindowKind.CAUSAL:
        return t - dt, t
    if scheme.kind is WindowKind.ANTI_CAUSAL:
        return t, t + dt
    return t - dt, t + dt


class LazyRows:
    """Row selection over one or more 2-D arrays, gathered on access.

    Lets cross-validation folds select and concatenate strided window views
    without materializing every input row at once. Slicing returns another
    ``LazyRows``; indexing with an integer array returns a gathered
    ``ndarray``; ``np.asarray`` gathers everything.
    """

    def __init__(self, parts, index=None):
        self.parts = list(parts)
        sizes = [len(p) for p in self.parts]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        widths = {p.shape[1] for p in self.parts}
        if len(widths) != 1:
            raise LengthMismatch("all parts must have the same row length")
        self._width = widths.pop()
        self.index = (np.arange(self._offsets[-1]) if index is None
                      else np.asarray(index, dtype=np.int64))

    @property
    def shape(self):
        return (self.index.size, self._width)

    ndim = 2

    def __len__(self):
        return self.index.size

    def _gather(self, rows):
        out = np.empty((rows.size, self._width))
        which = np.searchsorted(self._offsets, rows, side="right") - 1
        for k in np.unique(which):
            sel = which == k
            out[sel] = self.parts[k][rows[sel] - self._offsets[k]]
        return out

    def __getitem__(self, key):
        if isinstance(key, slice):
            return LazyRows(self.parts, self.index[key]) if key.step in (None, 1) \
                else self._gather(self.index[key])
        if isinstance(key, (int, np.integer)):
            return self._gather(self.index[[key]])[0]
        key = np.asarray(key)
        if key.dtype == bool:
            key = np.flatnonzero(key)
        return self._gather(self.index[key])

    def __array__(self, dtype=None, copy=None):
        out = self._gather(self.index)
        return out if dtype is None else out.astype(dtype, copy=False)


@dataclass
class WindowedDataset:
    """Rows of ``inputs`` (count x input_len) paired with scalar ``targets``."""

    inputs: np.ndarray
    targets: np.ndarray
    target_times: np.ndarray
    input_len: int
    fs: float
    scheme: WindowScheme
    source_direction: Direction = None
    target_kind: TargetKind = TargetKind.RAW_WAVEFORM
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.inputs) == len(self.targets) == len(self.target_times)):
            raise LengthMismatch("inputs, targets and target_times differ in length")
        if self.inputs.ndim != 2 or self.inputs.shape[1] != self.input_len:
            raise LengthMismatch("every input must have input_len samples")

    def __len__(self):
        return len(self.targets)

    def subset(self, rows, copy=True):
        """Selected rows (boolean mask or index array).

        With ``copy=False`` the inputs become a LazyRows selection that is
        gathered batch by batch during training.
        """
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        if copy:
            inputs = np.ascontiguousarray(self.inputs[rows])
        elif isinstance(self.inputs, LazyRows):
            inputs = LazyRows(self.inputs.parts, self.inputs.index[rows])
        else:
            inputs = LazyRows([self.inputs], rows)
        return replace(self, inputs=inputs, targets=self.targets[rows],
                       target_times=self.target_times[rows])

    def window_overlaps(self, start_s, end_s):
        """Rows whose input window or target falls inside [start_s, end_s)."""
        t1, t2 = window_bounds(self.target_times, self.scheme)
        return (t2 >= start_s) & (t1 < end_s)


def build_dataset(input_series, target_series, fs, scheme,
                  stride_s=DEFAULT_STRIDE_S, target_kind=TargetKind.RAW_WAVEFORM,
                  direction=None):
    """Pair input windows with target samples on a regular stride grid.

    Only targets whose whole window lies inside the record are emitted. The
    grid starts at the first such target. Inputs are strided views into
    ``input_series``, so large datasets cost no extra memory until copied.

    Parameters
    ----------
    input_series, target_series : array
        Equal-length signals sampled at ``fs``.
    fs : float
        Sampling rate (Hz).
    scheme : WindowScheme
    stride_s : float
        Spacing of target times (s); at least one sample.
    target_kind : TargetKind
    direction : Direction, optional

    Returns
    -------
    WindowedDataset
    """
    x = np.asarray(input_series, dtype=float)
    y = np.asarray(target_series, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch("input and target series must be 1-D and equal length")
    if stride_s * fs < 1 - 1e-9:
        raise ValueError("stride_s must be at least one sample")
    step = max(int(round(stride_s * fs)), 1)
    length = scheme.input_len(fs)
    off = scheme.start_offset(fs)
    first = -off
    last = x.size - 1 - (off + length - 1)
    if x.size < length or last < first:
        raise EmptyDataset(f"{x.size} samples cannot hold a {length}-sample window")
    idx = np.arange(first, last + 1, step)
    windows = sliding_window_view(x, length)[first + off::step][: idx.size]
    return WindowedDataset(windows, y[idx], idx / fs, length, fs, scheme,
                           Direction(direction) if direction else None,
                           TargetKind(target_kind))


def concat_datasets(parts, copy=True):
    """Stack datasets built with the same scheme; ``copy=False`` stays lazy."""
    parts = list(parts)
    if not parts:
        raise EmptyDataset("no datasets to concatenate")
    head = parts[0]
    if copy:
        inputs = np.concatenate([np.asarray(p.inputs) for p in parts])
    else:
        inputs = LazyRows([p.inputs for p in parts])
    return replace(head,
                   inputs=inputs,
                   targets=np.concatenate([p.targets for p in parts]),
                   target_times=np.concatenate([p.target_times for p in parts]))


# --------------------------------------------------------------------------
# cache file

_DS_MAGIC = b"ECGPCGD1"


def write_dataset(path, ds):
    """Binary cache: magic, uint32 header size, JSON header, float64 body.

    The body holds the inputs row-major, then the targets, then the target
    times, all little-endian.
    """
    header = {
        "input_len": int(ds.input_len),
        "count": len(ds),
        "fs": float(ds.fs),
        "direction": ds.source_direction.value if ds.source_direction else None,
        "scheme": ds.scheme.to_dict(),
        "target_kind": TargetKind(ds.target_kind).value,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(_DS_MAGIC + struct.pack("<I", len(raw)) + raw)
            fh.write(np.ascontiguousarray(ds.inputs, "<f8").tobytes())
            fh.write(np.ascontiguousarray(ds.targets, "<f8").tobytes())
            fh.write(np.ascontiguousarray(ds.target_times, "<f8").tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_dataset(path):
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc}") from exc
    if not blob.startswith(_DS_MAGIC):
        raise MalformedFile(f"{path}: not a dataset cache")
    off = len(_DS_MAGIC)
    (hlen,) = struct.unpack_from("<I", blob, off)
    off += 4
    try:
        h = json.loads(blob[off:off + hlen])
        count, length = h["count"], h["input_len"]
    except (ValueError, KeyError) as exc:
        raise MalformedFile(f"{path}: bad header") from exc
    off += hlen
    if len(blob) != off + 8 * count * (length + 2):
        raise MalformedFile(f"{path}: body size does not match header")
    body = np.frombuffer(blob, "<f8", offset=off).astype(np.float64)
    inputs = body[: count * length].reshape(count, length)
    targets = body[count * length: count * (length + 1)]
    times = body[count * (length + 1):]
    scheme = WindowScheme(**h["scheme"])
    return WindowedDataset(inputs, targets, times, length, h["fs"], scheme,
                           Direction(h["direction"]) if h["direction"] else None,
                           TargetKind(h["target_kind"]))


# --------------------------------------------------------------------------
# protocols

@dataclass
class SplitPlan:
    """Train/test folds over units (time segments or records).

    ``segments`` holds the ``(start_s, end_s)`` span of each unit for
    within-subject plans and is empty for cross-subject plans.
    """

    folds: list
    protocol: Protocol
    segments: list = field(default_factory=list)

    def __len__(self):
        return len(self.folds)


def within_subject_folds(record_duration_s, segment_len_s=180.0, n_folds=10):
    """Contiguous time blocks; fold k tests on block k and trains on the rest.

    Blocks are ``segment_len_s`` long from t=0; any remainder beyond
    ``n_folds * segment_len_s`` is appended to the last block.
    """
    if n_folds < 2:
        raise ValueError("n_folds must be at least 2")
    if record_duration_s < n_folds * segment_len_s - 1e-9:
        raise RecordTooShort(f"{record_duration_s} s < {n_folds} x {segment_len_s} s")
    edges = [k * segment_len_s for k in range(n_folds)] + [record_duration_s]
    segments = list(zip(edges[:-1], edges[1:]))
    units = np.arange(n_folds)
    folds = [(units[units != k], np.array([k])) for k in range(n_folds)]
    return SplitPlan(folds, Protocol.WITHIN_SUBJECT_10FOLD, segments)


def cross_subject_splits(n_records):
    """Leave-one-record-out folds."""
    if n_records < 2:
        raise TooFewRecords(f"LOOCV needs at least 2 records, got {n_records}")
    units = np.arange(n_records)
    folds = [(units[units != k], np.array([k])) for k in range(n_records)]
    return SplitPlan(folds, Protocol.CROSS_SUBJECT_LOOCV)


def evaluation_mask(record_duration_s, fs, guard_s=1.0):
    """True on [guard_s, duration - guard_s), False on the guard intervals."""
    if not record_duration_s > 2 * guard_s:
        raise RecordTooShort(f"{record_duration_s} s leaves nothing inside "
                             f"{guard_s} s guards")
    n = int(round(record_duration_s * fs))
    g = int(round(guard_s * fs))
    mask = np.zeros(n, dtype=bool)
    mask[g: n - g] = True
    return mask
