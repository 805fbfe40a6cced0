"""
Fiducial-point matching, error statistics and interval biomarkers.

A detected event counts as a hit when it lies within ``tolerance_s`` of an
annotated event of the same type; unmatched annotations are misses. Errors
are signed as ``detected - reference`` and summarized over hits only.

``detect_rpeaks`` is a small energy-envelope R-peak detector used for
synthetic end-to-end runs. Full delineation of the other fiducials is
expected from an external tool and read as an annotation file.
"""

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .errors import NoMatchedBeats, SignalTooShort
from .preprocess import bandpass
from .signal_io import FIDUCIAL_FIELDS

__all__ = [
    "FiducialType", "MatchResult", "BiomarkerReport", "detect_rpeaks",
    "match_times", "match_fiducials", "fiducial_errors", "error_table",
    "format_error_table", "biomarkers", "biomarker_errors", "DEFAULT_TOLERANCE_S",
]

log = logging.getLogger(__name__)

DEFAULT_TOLERANCE_S = 0.2
REFRACTORY_S = 0.25
INTEGRATION_S = 0.12
DETECTOR_BAND = (8.0, 20.0)


class FiducialType(str, enum.Enum):
    QRS_ON = "QRSon"
    R_PEAK = "Rpeak"
    QRS_OFF = "QRSoff"
    T_ON = "Ton"
    T_PEAK = "Tpeak"
    T_OFF = "Toff"

    @property
    def field(self):
        return FIDUCIAL_FIELDS[list(FiducialType).index(self)]


@dataclass
class MatchResult:
    fiducial_type: FiducialType
    pairs: list = field(default_factory=list)  # (reference_time, detected_time)
    misses: int = 0
    tolerance_s: float = DEFAULT_TOLERANCE_S
    false_detections: int = 0

    @property
    def n_reference(self):
        return len(self.pairs) + self.misses

    def errors_s(self):
        return np.array([d - r for r, d in self.pairs], dtype=float)


@dataclass
class BiomarkerReport:
    """Per-beat intervals in seconds; ``*_beats`` index the source beats."""

    qt_intervals: np.ndarray
    qrs_durations: np.ndarray
    qt_beats: np.ndarray
    qrs_beats: np.ndarray
    skipped_qt: int = 0
    skipped_qrs: int = 0
    mae_s: float = None
    rmse_s: float = None


# --------------------------------------------------------------------------
# R-peak detection


def _moving_average(x, n):
    return np.convolve(x, np.ones(n) / n, mode="same")


def detect_rpeaks(ecg, fs):
    """R-peak times (s) of a preprocessed ECG.

    Band-limit to 8-20 Hz, square, integrate over 120 ms and pick peaks of
    the integrated energy against an adaptive threshold halfway between
    running signal and noise levels (weighted a quarter of the way up).
    Candidates closer than 250 ms to an accepted beat are discarded. Long
    gaps are searched again at half the threshold. Each accepted peak is
    moved to the largest ECG deflection within the integration window.

    Parameters
    ----------
    ecg : array
    fs : float

    Returns
    -------
    array
        Strictly increasing times with gaps of at least 250 ms; empty for a
        flat signal.
    """
    x = np.asarray(ecg, dtype=float)
    if x.size < 2 * fs:
        raise SignalTooShort(f"{x.size / fs:.3g} s of ECG; need at least 2 s")
    if not np.any(x - x.mean()):
        return np.zeros(0)
    energy = _moving_average(bandpass(x, fs, *DETECTOR_BAND) ** 2,
                             max(int(round(INTEGRATION_S * fs)), 1))
    refractory = int(round(REFRACTORY_S * fs))
    cand, props = find_peaks(energy, distance=refractory, height=0)
    if cand.size == 0:
        return np.zeros(0)
    heights = props["peak_heights"]
    head = energy[: int(2 * fs)]
    spk, npk = 0.25 * head.max(), 0.5 * head.mean()

    accepted = []
    rr = []
    for idx, h in zip(cand, heights):
        threshold = npk + 0.25 * (spk - npk)
        if h > threshold and (not accepted or idx - accepted[-1] >= refractory):
            if accepted and rr:
                # search back through a long gap at half the threshold
                gap = idx - accepted[-1]
                if gap > 1.66 * np.mean(rr[-8:]):
                    inside = (cand > accepted[-1] + refractory) & (cand < idx - refractory)
                    inside &= energy[cand] > 0.5 * threshold
                    if np.any(inside):
                        best = cand[inside][np.argmax(energy[cand[inside]])]
                        rr.append(best - accepted[-1])
                        accepted.append(int(best))
                        spk = 0.25 * energy[best] + 0.75 * spk
            if accepted:
                rr.append(idx - accepted[-1])
            accepted.append(int(idx))
            spk = 0.125 * h + 0.875 * spk
        else:
            npk = 0.125 * h + 0.875 * npk

    half = max(int(round(INTEGRATION_S * fs / 2)), 1)
    baseline = np.median(x)
    peaks = []
    for idx in accepted:
        lo, hi = max(idx - half, 0), min(idx + half + 1, x.size)
        p = lo + int(np.argmax(np.abs(x[lo:hi] - baseline)))
        if peaks and p - peaks[-1] < refractory:
            if abs(x[p] - baseline) > abs(x[peaks[-1]] - baseline):
                peaks[-1] = p
            continue
        peaks.append(p)
    return np.asarray(peaks, dtype=float) / fs


# --------------------------------------------------------------------------
# matching


def match_times(reference, detected, tolerance_s=DEFAULT_TOLERANCE_S):
    """Greedy one-to-one nearest-neighbour matching of two time lists.

    Candidate pairs within the tolerance are accepted in order of increasing
    distance (ties broken by reference index, then detection index) as long
    as neither side is already used.

    Returns
    -------
    pairs : list of (i_ref, i_det)
        Sorted by reference index.
    """
    ref = np.asarray(reference, dtype=float)
    det = np.asarray(detected, dtype=float)
    if ref.size == 0 or det.size == 0:
        return []
    order = np.argsort(det, kind="stable")
    det_sorted = det[order]
    lo = np.searchsorted(det_sorted, ref - tolerance_s, side="left")
    hi = np.searchsorted(det_sorted, ref + tolerance_s, side="right")
    cands = []
    for i in range(ref.size):
        for k in range(lo[i], hi[i]):
            d = abs(det_sorted[k] - ref[i])
            if d <= tolerance_s:
                cands.append((d, i, int(order[k])))
    cands.sort()
    used_ref, used_det, pairs = set(), set(), []
    for _, i, j in cands:
        if i not in used_ref and j not in used_det:
            used_ref.add(i)
            used_det.add(j)
            pairs.append((i, j))
    pairs.sort()
    return pairs


def match_fiducials(reference, detected, tolerance_s=DEFAULT_TOLERANCE_S):
    """Match two FiducialSets type by type.

    Returns
    -------
    dict
        FiducialType -> MatchResult.
    """
    out = {}
    for ftype in FiducialType:
        ref = reference.times_of(ftype.field)
        det = detected.times_of(ftype.field)
        idx = match_times(ref, det, tolerance_s)
        out[ftype] = MatchResult(
            ftype, [(float(ref[i]), float(det[j])) for i, j in idx],
            misses=ref.size - len(idx), tolerance_s=tolerance_s,
            false_detections=det.size - len(idx))
    return out


def fiducial_errors(matches, total_annotated=None):
    """MAE, RMSE, hit count and sensitivity of one fiducial type.

    Parameters
    ----------
    matches : MatchResult
    total_annotated : int, optional
        Number of annotated events; defaults to hits plus misses.

    Returns
    -------
    dict
        ``mae_ms``, ``rmse_ms``, ``n_detected``, ``n_annotated``,
        ``sensitivity_pct`` and ``flags``. Without hits the error fields
        are 0 and ``flags`` holds ``"EmptyMatches"``.
    """
    n = len(matches.pairs)
    total = matches.n_reference if total_annotated is None else int(total_annotated)
    if total < n + matches.misses:
        raise ValueError(f"total_annotated={total} is below hits plus misses "
                         f"({n + matches.misses})")
    flags = []
    if n:
        err_ms = matches.errors_s() * 1000.0
        mae = float(np.mean(np.abs(err_ms)))
        rmse = float(np.sqrt(np.mean(err_ms ** 2)))
    else:
        mae = rmse = 0.0
        flags.append("EmptyMatches")
    sens = 100.0 * n / total if total else 0.0
    return {"mae_ms": mae, "rmse_ms": rmse, "n_detected": n,
            "n_annotated": total, "sensitivity_pct": sens, "flags": flags}


def error_table(reference, detected, tolerance_s=DEFAULT_TOLERANCE_S):
    """``fiducial_errors`` for every fiducial type, keyed by its label."""
    matches = match_fiducials(reference, detected, tolerance_s)
    return {ftype.value: fiducial_errors(m) for ftype, m in matches.items()}


def format_error_table(table, provenance=None):
    """CSV text with rows MAE, RMSE, N, Sen % and one column per type."""
    cols = [f.value for f in FiducialType]
    lines = [f"# {k}={v}" for k, v in (provenance or {}).items()]
    lines.append(",".join(["metric"] + cols))
    rows = [("MAE", "mae_ms", "{:.1f}"), ("RMSE", "rmse_ms", "{:.1f}"),
            ("N", "n_detected", "{:d}"), ("Sen %", "sensitivity_pct", "{:.1f}")]
    for label, key, fmt in rows:
        lines.append(",".join([label] + [fmt.format(table[c][key]) for c in cols]))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# biomarkers


def _interval(fid, start, end):
    vals, beats, skipped = [], [], 0
    for k, beat in enumerate(fid):
        a, b = getattr(beat, start), getattr(beat, end)
        if a is None or b is None:
            skipped += 1
            continue
        vals.append(b - a)
        beats.append(k)
    return np.array(vals, dtype=float), np.array(beats, dtype=int), skipped


def biomarkers(fid):
    """QT (``t_off - qrs_on``) and QRS (``qrs_off - qrs_on``) per beat.

    Beats missing an endpoint are skipped and counted.
    """
    qt, qt_beats, skip_qt = _interval(fid, "qrs_on", "t_off")
    qrs, qrs_beats, skip_qrs = _interval(fid, "qrs_on", "qrs_off")
    return BiomarkerReport(qt, qrs, qt_beats, qrs_beats, skip_qt, skip_qrs)


def _interval_error(ref_beats, ref_vals, est_beats, est_vals, beat_pairs):
    ref = dict(zip(ref_beats.tolist(), ref_vals))
    est = dict(zip(est_beats.tolist(), est_vals))
    diffs = [est[j] - ref[i] for i, j in beat_pairs if i in ref and j in est]
    if not diffs:
        return {"mae_ms": None, "rmse_ms": None, "n_beats": 0}
    d = np.array(diffs) * 1000.0
    return {"mae_ms": float(np.mean(np.abs(d))),
            "rmse_ms": float(np.sqrt(np.mean(d ** 2))), "n_beats": len(diffs)}


def biomarker_errors(reference, estimated, tolerance_s=DEFAULT_TOLERANCE_S):
    """QT and QRS-duration errors over beats matched by R-peak.

    Returns
    -------
    dict
        ``{"qt": {...}, "qrs": {...}, "n_matched_beats": int}`` where each
        inner dict holds ``mae_ms``, ``rmse_ms`` and ``n_beats`` (errors are
        ``None`` when no matched beat defines the interval on both sides).
    """
    ref_idx = [k for k, b in enumerate(reference) if b.r_peak is not None]
    est_idx = [k for k, b in enumerate(estimated) if b.r_peak is not None]
    pairs = match_times([reference.beats[k].r_peak for k in ref_idx],
                        [estimated.beats[k].r_peak for k in est_idx], tolerance_s)
    if not pairs:
        raise NoMatchedBeats("no beat pair has R-peaks within the tolerance")
    beat_pairs = [(ref_idx[i], est_idx[j]) for i, j in pairs]
    ref_rep, est_rep = biomarkers(reference), biomarkers(estimated)
    qt = _interval_error(ref_rep.qt_beats, ref_rep.qt_intervals,
                         est_rep.qt_beats, est_rep.qt_intervals, beat_pairs)
    qrs = _interval_error(ref_rep.qrs_beats, ref_rep.qrs_durations,
                          est_rep.qrs_beats, est_rep.qrs_durations, beat_pairs)
    return {"qt": qt, "qrs": qrs,
            "n_matched_beats": len(beat_pairs)}
