"""
Paired ECG/PCG records and fiducial annotations on disk.

Two record formats are supported:

``PairedCsv``
    UTF-8 text. First line ``fs=<int>``, optional second line
    ``subject=<id>,scenario=<name>``, optional ``# `` comment lines carrying
    provenance, an optional ``ecg,pcg`` header, then one ``ecg,pcg`` row per
    sample. Fiducials, when present, live in a sidecar
    ``<stem>.fiducials.csv`` next to the record.

``RawBinaryPair``
    ``ECGPCGR1`` magic, little-endian uint32 header length, a UTF-8 JSON
    header (fs, sample counts, metadata, fiducials) and then the ECG and PCG
    channels as little-endian float64 blocks.

Fiducial times are kept in seconds so they survive resampling.
"""

import enum
import json
import math
import os
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (IoFailure, LengthMismatch, MalformedFile,
                     NonFiniteSample, OrderingViolation)

__all__ = [
    "Scenario", "RecordFormat", "BeatAnnotation", "FiducialSet", "Record",
    "FIDUCIAL_FIELDS", "load_record", "write_record", "load_fiducials",
    "write_fiducials", "fiducial_sidecar",
]

FIDUCIAL_FIELDS = ("qrs_on", "r_peak", "qrs_off", "t_on", "t_peak", "t_off")

_BIN_MAGIC = b"ECGPCGR1"


class Scenario(str, enum.Enum):
    REST = "Rest"
    WALK = "Walk"
    TREADMILL_STRESS = "TreadmillStress"
    BICYCLE_STRESS = "BicycleStress"
    SYNTHETIC = "Synthetic"


class RecordFormat(str, enum.Enum):
    PAIRED_CSV = "PairedCsv"
    RAW_BINARY_PAIR = "RawBinaryPair"


@dataclass(frozen=True)
class BeatAnnotation:
    """Fiducial times of one beat, in seconds. Absent events are ``None``."""

    qrs_on: Optional[float] = None
    r_peak: Optional[float] = None
    qrs_off: Optional[float] = None
    t_on: Optional[float] = None
    t_peak: Optional[float] = None
    t_off: Optional[float] = None

    def __post_init__(self):
        present = [(name, getattr(self, name)) for name in FIDUCIAL_FIELDS
                   if getattr(self, name) is not None]
        for name, value in present:
            if not math.isfinite(value):
                raise NonFiniteSample(f"fiducial {name} is not finite")
        for (n0, v0), (n1, v1) in zip(present, present[1:]):
            if v0 > v1:
                raise OrderingViolation(
                    f"{n0}={v0} comes after {n1}={v1} within a beat")

    def times(self):
        return [getattr(self, name) for name in FIDUCIAL_FIELDS]

    def shifted(self, **offsets):
        """Copy with the named fields moved by the given offsets (s)."""
        changes = {k: getattr(self, k) + v for k, v in offsets.items()
                   if getattr(self, k) is not None}
        return replace(self, **changes)


@dataclass(frozen=True)
class FiducialSet:
    """Ordered beats. Beats with an R-peak are sorted by it, without ties."""

    beats: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "beats", tuple(self.beats))
        r = [b.r_peak for b in self.beats if b.r_peak is not None]
        if any(b >= a for a, b in zip(r[1:], r)):
            raise OrderingViolation("beats must be ordered by strictly "
                                    "increasing r_peak")

    def __len__(self):
        return len(self.beats)

    def __iter__(self):
        return iter(self.beats)

    def times_of(self, name):
        """Present times of one fiducial type, in beat order."""
        return np.array([getattr(b, name) for b in self.beats
                         if getattr(b, name) is not None], dtype=float)

    def all_times(self):
        return np.array([t for b in self.beats for t in b.times()
                         if t is not None], dtype=float)


@dataclass(eq=False)
class Record:
    """A synchronized ECG/PCG pair sampled at ``fs`` Hz."""

    subject_id: str
    scenario: Scenario
    fs: int
    ecg: np.ndarray
    pcg: np.ndarray
    fiducials: Optional[FiducialSet] = None
    provenance: str = ""

    def __post_init__(self):
        self.scenario = Scenario(self.scenario)
        if isinstance(self.fs, float) and self.fs.is_integer():
            self.fs = int(self.fs)
        if not isinstance(self.fs, (int, np.integer)) or self.fs <= 0:
            raise MalformedFile(f"fs must be a positive integer, got {self.fs!r}")
        self.fs = int(self.fs)
        self.ecg = np.ascontiguousarray(self.ecg, dtype=np.float64)
        self.pcg = np.ascontiguousarray(self.pcg, dtype=np.float64)
        if self.ecg.ndim != 1 or self.pcg.ndim != 1:
            raise MalformedFile("channels must be one-dimensional")
        if self.ecg.shape != self.pcg.shape:
            raise LengthMismatch(
                f"ecg has {self.ecg.size} samples, pcg has {self.pcg.size}")
        if not (np.all(np.isfinite(self.ecg)) and np.all(np.isfinite(self.pcg))):
            raise NonFiniteSample("record contains NaN or Inf samples")
        if self.fiducials is not None and len(self.fiducials):
            t = self.fiducials.all_times()
            if t.size and (t.min() < 0 or t.max() >= self.duration):
                raise OrderingViolation(
                    "fiducial times must lie within [0, duration)")

    @property
    def n_samples(self):
        return self.ecg.size

    @property
    def duration(self):
        return self.ecg.size / self.fs

    def channel(self, name):
        if name not in ("ecg", "pcg"):
            raise ValueError(f"unknown channel {name!r}")
        return getattr(self, name)

    def __eq__(self, other):
        if not isinstance(other, Record):
            return NotImplemented
        return (self.subject_id == other.subject_id
                and self.scenario == other.scenario
                and self.fs == other.fs
                and np.array_equal(self.ecg, other.ecg)
                and np.array_equal(self.pcg, other.pcg)
                and self.fiducials == other.fiducials
                and self.provenance == other.provenance)


# --------------------------------------------------------------------------
# fiducial CSV

def fiducial_sidecar(path):
    path = Path(path)
    return path.with_name(path.stem + ".fiducials.csv")


def load_fiducials(path):
    """Read a fiducial CSV (one beat per row, blank cell = absent event).

    Parameters
    ----------
    path : str or Path
        File with header ``qrs_on,r_peak,qrs_off,t_on,t_peak,t_off``.
        A headerless file is accepted when every row has six cells.

    Returns
    -------
    FiducialSet
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc}") from exc
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if lines and lines[0].replace(" ", "").lower() == ",".join(FIDUCIAL_FIELDS):
        lines = lines[1:]
    beats = []
    for lineno, line in enumerate(lines, 1):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(FIDUCIAL_FIELDS):
            raise MalformedFile(f"row {lineno}: expected 6 cells, got {len(cells)}")
        try:
            values = [float(c) if c else None for c in cells]
        except ValueError as exc:
            raise MalformedFile(f"row {lineno}: {exc}") from exc
        beats.append(BeatAnnotation(*values))
    beats.sort(key=lambda b: (b.r_peak is None, b.r_peak or 0.0))
    return FiducialSet(beats)


def write_fiducials(path, fiducials):
    rows = [",".join(FIDUCIAL_FIELDS)]
    for beat in fiducials:
        rows.append(",".join("" if t is None else repr(float(t))
                             for t in beat.times()))
    _write_text(path, "\n".join(rows) + "\n")


# --------------------------------------------------------------------------
# records

def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _write_bytes(path, payload):
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _fiducials_to_json(fid):
    if fid is None:
        return None
    return [beat.times() for beat in fid]


def _fiducials_from_json(rows):
    if rows is None:
        return None
    try:
        return FiducialSet([BeatAnnotation(*row) for row in rows])
    except TypeError as exc:
        raise MalformedFile(f"bad fiducial table in header: {exc}") from exc


def write_record(path, record, format=RecordFormat.PAIRED_CSV):
    """Write ``record`` so that :func:`load_record` returns an equal Record."""
    format = RecordFormat(format)
    if format is RecordFormat.PAIRED_CSV:
        head = [f"fs={record.fs}",
                f"subject={record.subject_id},scenario={record.scenario.value}"]
        if record.provenance:
            head += ["# " + ln for ln in record.provenance.split("\n")]
        head.append("ecg,pcg")
        body = "\n".join(f"{a!r},{b!r}" for a, b in
                         zip(record.ecg.tolist(), record.pcg.tolist()))
        _write_text(path, "\n".join(head) + "\n" + body + ("\n" if body else ""))
        side = fiducial_sidecar(path)
        if record.fiducials is not None:
            write_fiducials(side, record.fiducials)
        elif side.exists():
            os.remove(side)
        return
    header = {
        "fs": record.fs,
        "n_ecg": int(record.ecg.size),
        "n_pcg": int(record.pcg.size),
        "subject": record.subject_id,
        "scenario": record.scenario.value,
        "provenance": record.provenance,
        "fiducials": _fiducials_to_json(record.fiducials),
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = (_BIN_MAGIC + struct.pack("<I", len(raw)) + raw
               + record.ecg.astype("<f8").tobytes()
               + record.pcg.astype("<f8").tobytes())
    _write_bytes(path, payload)


def _parse_csv_record(path, text):
    lines = text.split("\n")
    if not lines or not lines[0].startswith("fs="):
        raise MalformedFile(f"{path}: first line must be 'fs=<int>'")
    try:
        fs = int(lines[0][3:].strip())
    except ValueError as exc:
        raise MalformedFile(f"{path}: bad fs line {lines[0]!r}") from exc
    subject, scenario, notes = Path(path).stem, Scenario.SYNTHETIC, []
    i = 1
    if i < len(lines) and lines[i].startswith("subject="):
        meta = dict(kv.split("=", 1) for kv in lines[i].split(",") if "=" in kv)
        subject = meta.get("subject", subject)
        try:
            scenario = Scenario(meta.get("scenario", scenario.value))
        except ValueError as exc:
            raise MalformedFile(f"{path}: unknown scenario") from exc
        i += 1
    while i < len(lines) and lines[i].startswith("#"):
        notes.append(lines[i][2:] if lines[i].startswith("# ") else lines[i][1:])
        i += 1
    if i < len(lines) and lines[i].replace(" ", "").lower() == "ecg,pcg":
        i += 1
    ecg, pcg = [], []
    ended_pcg = ended_ecg = False
    for lineno, line in enumerate(lines[i:], i + 1):
        line = line.strip()
        if not line:
            continue
        cells = line.split(",")
        if len(cells) == 1:
            cells.append("")
        if len(cells) != 2:
            raise MalformedFile(f"{path}:{lineno}: expected 2 columns")
        a, b = cells[0].strip(), cells[1].strip()
        try:
            if a:
                if ended_ecg:
                    raise MalformedFile(f"{path}:{lineno}: gap in ecg column")
                ecg.append(float(a))
            else:
                ended_ecg = True
            if b:
                if ended_pcg:
                    raise MalformedFile(f"{path}:{lineno}: gap in pcg column")
                pcg.append(float(b))
            else:
                ended_pcg = True
        except ValueError as exc:
            raise MalformedFile(f"{path}:{lineno}: {exc}") from exc
    if len(ecg) != len(pcg):
        raise LengthMismatch(
            f"{path}: ecg has {len(ecg)} samples, pcg has {len(pcg)}")
    side = fiducial_sidecar(path)
    fid = load_fiducials(side) if side.exists() else None
    return Record(subject, scenario, fs, np.array(ecg), np.array(pcg),
                  fid, "\n".join(notes))


def _parse_binary_record(path, blob):
    if not blob.startswith(_BIN_MAGIC) or len(blob) < len(_BIN_MAGIC) + 4:
        raise MalformedFile(f"{path}: not a RawBinaryPair file")
    off = len(_BIN_MAGIC)
    (hlen,) = struct.unpack_from("<I", blob, off)
    off += 4
    try:
        header = json.loads(blob[off:off + hlen].decode("utf-8"))
        fs, n_ecg, n_pcg = header["fs"], header["n_ecg"], header["n_pcg"]
    except (ValueError, KeyError) as exc:
        raise MalformedFile(f"{path}: bad header: {exc}") from exc
    off += hlen
    if len(blob) != off + 8 * (n_ecg + n_pcg):
        raise MalformedFile(f"{path}: payload size does not match header")
    if n_ecg != n_pcg:
        raise LengthMismatch(f"{path}: ecg has {n_ecg} samples, pcg has {n_pcg}")
    ecg = np.frombuffer(blob, "<f8", n_ecg, off).astype(np.float64)
    pcg = np.frombuffer(blob, "<f8", n_pcg, off + 8 * n_ecg).astype(np.float64)
    return Record(header.get("subject", Path(path).stem),
                  Scenario(header.get("scenario", "Synthetic")), fs, ecg, pcg,
                  _fiducials_from_json(header.get("fiducials")),
                  header.get("provenance", ""))


def load_record(path, format=None):
    """Load a paired recording.

    Parameters
    ----------
    path : str or Path
    format : RecordFormat or str, optional
        Inferred from the file magic when omitted.

    Returns
    -------
    Record
    """
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc}") from exc
    if format is None:
        format = (RecordFormat.RAW_BINARY_PAIR if blob.startswith(_BIN_MAGIC)
                  else RecordFormat.PAIRED_CSV)
    format = RecordFormat(format)
    if format is RecordFormat.RAW_BINARY_PAIR:
        return _parse_binary_record(path, blob)
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFile(f"{path}: not UTF-8 text") from exc
    return _parse_csv_record(path, text)

