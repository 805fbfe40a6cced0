"""
Reconstruction fidelity: SNR, correlation, Welch spectra and coherence.

Spectra use Hann-tapered segments (1 s, 50 % overlap by default) without
detrending, one-sided density scaling, so that ``sum(P) * df`` equals the
mean power of the tapered segments.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (DegenerateVariance, EmptySelection, InsufficientAveraging,
                     LengthMismatch, SignalTooShort, ZeroSignal)
from .windowing import evaluation_mask

__all__ = [
    "Spectrum", "MetricsReport", "snr_db", "corr_coef", "welch_psd",
    "cross_psd", "coherence", "weighted_coherence", "spectrum_weighted_average",
    "evaluate", "SNR_CAP_DB",
]

SNR_CAP_DB = 120.0
EPS_POWER_REL = 1e-12


@dataclass
class Spectrum:
    freqs: np.ndarray
    values: np.ndarray
    resolution_hz: float
    n_segments_averaged: int


@dataclass
class MetricsReport:
    snr_db: float
    cc: float
    coherence_freqs: np.ndarray
    coherence_curve: np.ndarray
    weighted_coherence: float
    n_samples_evaluated: int
    flags: list = field(default_factory=list)

    def to_dict(self):
        return {
            "snr_db": float(self.snr_db),
            "cc": float(self.cc),
            "weighted_coherence": float(self.weighted_coherence),
            "coherence_curve": {
                "freq": [float(f) for f in self.coherence_freqs],
                "value": [float(v) for v in self.coherence_curve],
            },
            "n_samples_evaluated": int(self.n_samples_evaluated),
            "flags": list(self.flags),
        }

    def to_json(self, **extra):
        payload = self.to_dict()
        payload.update(extra)
        return json.dumps(payload, sort_keys=True, indent=2)


def _pair(x, x_hat, mask):
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise LengthMismatch(f"{x.shape} vs {x_hat.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise LengthMismatch("mask length differs from the signals")
        x, x_hat = x[mask], x_hat[mask]
    if x.size < 2:
        raise EmptySelection("fewer than 2 samples selected")
    return x, x_hat


def snr_db(x, x_hat, mask=None):
    """10 log10 of signal power over residual power, capped at +120 dB."""
    x, x_hat = _pair(x, x_hat, mask)
    signal = np.sum(x * x)
    if signal == 0:
        raise ZeroSignal("reference signal has zero power")
    residual = np.sum((x - x_hat) ** 2)
    if residual < 1e-12 * signal:
        return SNR_CAP_DB
    return float(10 * np.log10(signal / residual))


def corr_coef(x, x_hat, mask=None):
    """Pearson correlation of the selected samples."""
    x, x_hat = _pair(x, x_hat, mask)
    a = x - x.mean()
    b = x_hat - x_hat.mean()
    sa, sb = np.sqrt(np.sum(a * a)), np.sqrt(np.sum(b * b))
    if sa == 0 or sb == 0:
        raise DegenerateVariance("a signal has zero variance")
    return float(np.clip(np.sum(a * b) / (sa * sb), -1.0, 1.0))


def _segments(x, fs, window_s, overlap):
    nper = int(round(window_s * fs))
    if nper < 2:
        raise SignalTooShort("window shorter than 2 samples")
    if x.size < nper:
        raise SignalTooShort(f"{x.size} samples < one {nper}-sample window")
    step = nper - int(round(overlap * nper))
    if step < 1:
        raise ValueError("overlap must be below 1")
    return sliding_window_view(x, nper)[::step], nper


def _hann(n):
    # periodic Hann, the usual choice for spectral estimation
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def _fft_segments(x, fs, window_s, overlap):
    segs, nper = _segments(x, fs, window_s, overlap)
    w = _hann(nper)
    spec = np.fft.rfft(segs * w, axis=-1)
    return spec, nper, np.sum(w * w)


def _one_sided(avg, nper, fs, wss):
    avg = avg / (fs * wss)
    avg[1:] *= 2
    if nper % 2 == 0:
        avg[-1] /= 2
    return avg


def cross_psd(x, x_hat, fs, window_s=1.0, overlap=0.5):
    """Averaged cross-periodogram conj(X) * X_hat (complex)."""
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise LengthMismatch(f"{x.shape} vs {x_hat.shape}")
    fx, nper, wss = _fft_segments(x, fs, window_s, overlap)
    fy, _, _ = _fft_segments(x_hat, fs, window_s, overlap)
    avg = _one_sided(np.mean(np.conj(fx) * fy, axis=0), nper, fs, wss)
    return Spectrum(np.fft.rfftfreq(nper, 1 / fs), avg, fs / nper, fx.shape[0])


def welch_psd(x, fs, window_s=1.0, overlap=0.5):
    """One-sided Welch power spectral density.

    Parameters
    ----------
    x : array
    fs : float
        Sampling rate (Hz).
    window_s : float
        Segment length (s); sets the resolution to ``1 / window_s`` Hz.
    overlap : float
        Fractional overlap of consecutive segments.

    Returns
    -------
    Spectrum
    """
    x = np.asarray(x, dtype=float)
    fx, nper, wss = _fft_segments(x, fs, window_s, overlap)
    avg = _one_sided(np.mean(np.abs(fx) ** 2, axis=0), nper, fs, wss)
    return Spectrum(np.fft.rfftfreq(nper, 1 / fs), avg, fs / nper, fx.shape[0])


def _spectra(x, x_hat, fs, window_s, overlap):
    pxy = cross_psd(x, x_hat, fs, window_s, overlap)
    if pxy.n_segments_averaged < 2:
        raise InsufficientAveraging("coherence needs at least 2 segments")
    pxx = welch_psd(x, fs, window_s, overlap)
    pyy = welch_psd(x_hat, fs, window_s, overlap)
    return pxx, pyy, pxy


def _coherence_from(pxx, pyy, pxy):
    a, b = pxx.values, pyy.values
    bad = (a <= EPS_POWER_REL * a.mean()) | (b <= EPS_POWER_REL * b.mean())
    mu = np.zeros_like(a)
    ok = ~bad
    mu[ok] = np.abs(pxy.values[ok]) ** 2 / (a[ok] * b[ok])
    return mu


def coherence(x, x_hat, fs, window_s=1.0, overlap=0.5):
    """Magnitude-squared coherence per frequency bin.

    Bins where either auto-spectrum is negligible are set to 0.

    Returns
    -------
    freqs, mu : array
    """
    pxx, pyy, pxy = _spectra(x, x_hat, fs, window_s, overlap)
    return pxx.freqs, _coherence_from(pxx, pyy, pxy)


def spectrum_weighted_average(pxx, mu):
    """Average of ``mu`` weighted by the reference power ``pxx``."""
    pxx = np.asarray(pxx, dtype=float)
    mu = np.asarray(mu, dtype=float)
    total = pxx.sum()
    if total <= 0:
        raise ZeroSignal("reference spectrum has no power")
    return float(np.sum(pxx * mu) / total)


def weighted_coherence(x, x_hat, fs, window_s=1.0, overlap=0.5, band=None):
    """Coherence averaged over frequency with the reference PSD as weights.

    ``band=(lo, hi)`` restricts the average to lo <= f <= hi.
    """
    pxx, pyy, pxy = _spectra(x, x_hat, fs, window_s, overlap)
    mu = _coherence_from(pxx, pyy, pxy)
    sel = np.ones_like(mu, dtype=bool)
    if band is not None:
        sel = (pxx.freqs >= band[0]) & (pxx.freqs <= band[1])
    return spectrum_weighted_average(pxx.values[sel], mu[sel])


def evaluate(x, x_hat, fs, guard_s=1.0, window_s=1.0, overlap=0.5):
    """SNR, CC and coherence over the record minus ``guard_s`` at each end.

    A zero-variance reconstruction gets ``cc = 0`` and the flag
    ``"DegenerateVariance"`` instead of an exception.
    """
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    if x.shape != x_hat.shape:
        raise LengthMismatch(f"{x.shape} vs {x_hat.shape}")
    duration = x.size / fs
    if not duration > 2 * guard_s + 2 * window_s:
        raise SignalTooShort(f"{duration} s is too short for guards of {guard_s} s "
                             "and two spectral windows")
    mask = evaluation_mask(duration, fs, guard_s)
    flags = []
    snr = snr_db(x, x_hat, mask)
    try:
        cc = corr_coef(x, x_hat, mask)
    except DegenerateVariance:
        cc = 0.0
        flags.append("DegenerateVariance")
    xi, yi = x[mask], x_hat[mask]
    pxx, pyy, pxy = _spectra(xi, yi, fs, window_s, overlap)
    mu = _coherence_from(pxx, pyy, pxy)
    mubar = spectrum_weighted_average(pxx.values, mu)
    return MetricsReport(snr, cc, pxx.freqs, mu, mubar, int(mask.sum()), flags)
