"""
Filtering, outlier clipping, time-adaptive normalization and decimation.

The ECG path is bandpass -> notch -> clip -> normalize -> resample; the PCG
path skips the notch. All IIR filters are applied forward and backward.
"""

from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np
import scipy.signal as ss

from .errors import (DegenerateSegment, EcgPcgError, InvalidBand, InvalidConfig,
                     InvalidFrequency, NonIntegerFactor, SignalTooShort,
                     StageError, WindowTooShort)

__all__ = [
    "MovingStats", "PreprocessConfig", "bandpass", "notch", "moving_stats",
    "clip_outliers", "adaptive_normalize", "resample_decimate",
    "decimation_filter", "preprocess_pipeline",
]

BUTTER_ORDER = 4
DEGENERATE_REL = 1e-8


@dataclass(frozen=True)
class MovingStats:
    m: np.ndarray
    sigma: np.ndarray
    window_s: float


@dataclass(frozen=True)
class PreprocessConfig:
    ecg_band: Tuple[float, float] = (0.2, 30.0)
    pcg_band: Tuple[float, float] = (10.0, 200.0)
    notch_hz: float = 50.0
    notch_q: float = 45.0
    clip_k: float = 6.0
    clip_window_s: float = 60.0
    norm_window_s: float = 60.0
    target_fs: int = 1000

    def validate(self, fs):
        for name in ("ecg_band", "pcg_band"):
            lo, hi = getattr(self, name)
            if not 0 < lo < hi < fs / 2:
                raise InvalidConfig(f"{name}={lo, hi} invalid for fs={fs}")
        if not self.notch_q > 0 or not self.clip_k > 0:
            raise InvalidConfig("notch_q and clip_k must be positive")
        if self.target_fs <= 0 or fs % self.target_fs:
            raise InvalidConfig(f"target_fs={self.target_fs} must divide fs={fs}")


def _zero_phase_sos(x, sos):
    x = np.asarray(x, dtype=float)
    padlen = 3 * 2 * sos.shape[0]
    if x.size <= padlen:
        raise SignalTooShort(f"need more than {padlen} samples, got {x.size}")
    return ss.sosfiltfilt(sos, x, padtype="even", padlen=padlen)


def bandpass_sos(fs, lo_hz, hi_hz, order=BUTTER_ORDER):
    """Butterworth highpass/lowpass cascade for zero-phase use.

    The two cutoffs are moved outwards so that the squared (forward-backward)
    response is -3 dB, rather than -6 dB, at ``lo_hz`` and ``hi_hz``.
    """
    if not 0 < lo_hz < hi_hz < fs / 2:
        raise InvalidBand(f"need 0 < lo < hi < fs/2, got ({lo_hz}, {hi_hz}) "
                          f"at fs={fs}")
    stretch = (np.sqrt(2) - 1) ** (1 / (2 * order))
    hi_cut = min(hi_hz / stretch, 0.499 * fs)
    hp = ss.butter(order, lo_hz * stretch, "highpass", fs=fs, output="sos")
    lp = ss.butter(order, hi_cut, "lowpass", fs=fs, output="sos")
    return np.vstack([hp, lp])


def bandpass(x, fs, lo_hz, hi_hz):
    """Zero-phase Butterworth bandpass.

    Parameters
    ----------
    x : array
        Input signal.
    fs : float
        Sampling rate (Hz).
    lo_hz, hi_hz : float
        Band edges (Hz); the zero-phase response is -3 dB there.

    Returns
    -------
    array
        Filtered signal, same length as ``x``.
    """
    return _zero_phase_sos(x, bandpass_sos(fs, lo_hz, hi_hz))


def notch(x, fs, f0_hz, q):
    """Second-order IIR notch (bandwidth ``f0_hz / q``), applied forward-backward."""
    if not 0 < f0_hz < fs / 2:
        raise InvalidFrequency(f"notch frequency {f0_hz} outside (0, {fs / 2})")
    if not q > 0:
        raise InvalidFrequency("q must be positive")
    b, a = ss.iirnotch(f0_hz, q, fs=fs)
    return _zero_phase_sos(x, ss.tf2sos(b, a))


def _window_bounds(n, win):
    left = win // 2
    right = win - 1 - left
    idx = np.arange(n)
    return np.maximum(idx - left, 0), np.minimum(idx + right, n - 1) + 1


def moving_stats(x, fs, window_s):
    """Centered moving mean and population standard deviation.

    The window shrinks at the record edges to the samples that exist.
    """
    x = np.asarray(x, dtype=float)
    win = int(round(window_s * fs))
    if win < 2:
        raise WindowTooShort(f"window of {window_s} s at {fs} Hz has {win} samples")
    if x.size == 0:
        return MovingStats(x.copy(), x.copy(), window_s)
    # shifting by the global mean keeps the prefix sums well conditioned
    shift = x.mean()
    y = x - shift
    c1 = np.concatenate([[0.0], np.cumsum(y)])
    c2 = np.concatenate([[0.0], np.cumsum(y * y)])
    lo, hi = _window_bounds(x.size, win)
    count = hi - lo
    mean = (c1[hi] - c1[lo]) / count
    var = (c2[hi] - c2[lo]) / count - mean ** 2
    sigma = np.sqrt(np.maximum(var, 0.0))
    return MovingStats(mean + shift, sigma, window_s)


def clip_outliers(x, fs, k, window_s):
    """Clip to ``m(t) +/- k * sigma(t)`` with moving statistics over ``window_s``."""
    if not k > 0:
        raise InvalidConfig("k must be positive")
    x = np.asarray(x, dtype=float)
    st = moving_stats(x, fs, window_s)
    return np.clip(x, st.m - k * st.sigma, st.m + k * st.sigma)


def adaptive_normalize(x, fs, window_s):
    """z(t) = (x(t) - m(t)) / sigma(t) with moving statistics over ``window_s``.

    Raises
    ------
    DegenerateSegment
        If sigma(t) falls below 1e-8 times the global RMS anywhere.
    """
    x = np.asarray(x, dtype=float)
    st = moving_stats(x, fs, window_s)
    rms = np.sqrt(np.mean(x * x)) if x.size else 0.0
    floor = DEGENERATE_REL * rms
    if rms == 0 or np.any(st.sigma < floor) or np.any(st.sigma == 0):
        bad = int(np.argmin(st.sigma)) if x.size else 0
        raise DegenerateSegment(f"moving sigma vanishes near sample {bad}")
    return (x - st.m) / st.sigma


def decimation_filter(factor, fs_in, fs_out):
    """Kaiser windowed-sinc low-pass, 8 taps per unit of ``factor`` plus one."""
    numtaps = 8 * factor + 1
    return ss.firwin(numtaps, 0.45 * fs_out, window=("kaiser", 8.0), fs=fs_in)


def resample_decimate(x, fs_in, fs_out):
    """Anti-alias filter (group-delay compensated) then keep every factor-th sample."""
    x = np.asarray(x, dtype=float)
    if fs_out <= 0 or fs_in % fs_out:
        raise NonIntegerFactor(f"{fs_in} Hz is not an integer multiple of {fs_out} Hz")
    factor = int(fs_in // fs_out)
    if factor == 1:
        return x.copy()
    taps = decimation_filter(factor, fs_in, fs_out)
    delay = (taps.size - 1) // 2
    if x.size <= delay:
        raise SignalTooShort(f"need more than {delay} samples to decimate")
    padded = np.pad(x, delay, mode="reflect")
    smooth = np.convolve(padded, taps, mode="valid")
    return smooth[::factor]


def _channel(x, fs, cfg, band, with_notch, channel):
    stages = [("bandpass", lambda s: bandpass(s, fs, *band))]
    if with_notch:
        stages.append(("notch", lambda s: notch(s, fs, cfg.notch_hz, cfg.notch_q)))
    stages += [
        ("clip", lambda s: clip_outliers(s, fs, cfg.clip_k, cfg.clip_window_s)),
        ("normalize", lambda s: adaptive_normalize(s, fs, cfg.norm_window_s)),
        ("resample", lambda s: resample_decimate(s, fs, cfg.target_fs)),
    ]
    for name, stage in stages:
        try:
            x = stage(x)
        except (EcgPcgError, ValueError) as exc:
            raise StageError(name, channel, exc) from exc
    return x


def preprocess_pipeline(record, cfg=PreprocessConfig()):
    """Run both channels of ``record`` through the preprocessing chain.

    Returns a new Record at ``cfg.target_fs``; fiducial times are unchanged.
    """
    cfg.validate(record.fs)
    ecg = _channel(record.ecg, record.fs, cfg, cfg.ecg_band, True, "ecg")
    pcg = _channel(record.pcg, record.fs, cfg, cfg.pcg_band, False, "pcg")
    return replace(record, fs=cfg.target_fs, ecg=ecg, pcg=pcg)
