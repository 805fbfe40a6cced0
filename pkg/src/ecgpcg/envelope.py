"""
Analytic signal, instantaneous amplitude and phase.

x(t) = A(t) exp(j phi(t)); A is used as a modeling target in place of the raw
waveform when phase alignment between subjects cannot be trusted.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SignalTooShort
from .windowing import (DEFAULT_STRIDE_S, TargetKind, build_dataset)

__all__ = ["AnalyticSeries", "analytic_signal", "instantaneous_amplitude",
           "instantaneous_phase", "analytic_series", "envelope_dataset"]


@dataclass(frozen=True)
class AnalyticSeries:
    amplitude: np.ndarray
    phase: np.ndarray


def analytic_signal(x):
    """Analytic signal by one FFT over the whole record.

    Negative frequencies are zeroed, positive ones doubled, DC (and Nyquist,
    for even lengths) kept as is.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        raise SignalTooShort(f"need at least 4 samples, got {n}")
    spec = np.fft.fft(x)
    h = np.zeros(n)
    h[0] = 1.0
    if n % 2 == 0:
        h[n // 2] = 1.0
        h[1:n // 2] = 2.0
    else:
        h[1:(n + 1) // 2] = 2.0
    z = np.fft.ifft(spec * h)
    # the real part is the input by construction; drop the FFT round-off
    return x + 1j * z.imag


def instantaneous_amplitude(x):
    return np.abs(analytic_signal(x))


def instantaneous_phase(x):
    """Wrapped phase in (-pi, pi]."""
    phi = np.angle(analytic_signal(x))
    phi[phi <= -np.pi] += 2 * np.pi
    return phi


def analytic_series(x):
    z = analytic_signal(x)
    phi = np.angle(z)
    phi[phi <= -np.pi] += 2 * np.pi
    return AnalyticSeries(np.abs(z), phi)


def envelope_dataset(input_series, target_series, fs, scheme,
                     stride_s=DEFAULT_STRIDE_S, envelope_inputs=True,
                     direction=None):
    """Windowed dataset whose targets are the target-signal envelope.

    With ``envelope_inputs=False`` the windows hold the raw input waveform
    instead of its envelope.
    """
    target_env = instantaneous_amplitude(target_series)
    source = (instantaneous_amplitude(input_series) if envelope_inputs
              else np.asarray(input_series, dtype=float))
    return build_dataset(source, target_env, fs, scheme, stride_s,
                         TargetKind.ENVELOPE, direction)
