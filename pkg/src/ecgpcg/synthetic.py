"""
Synthetic coupled ECG/PCG records with known ground truth.

Each beat of the ECG is the sum of three Gaussian bumps (P, QRS, T) placed on
an RR grid that follows the configured heart-rate trajectory. The PCG holds
one band-limited burst per heart sound: S1 is centred ``electromechanical_delay_s``
after the R-peak and S2 follows the end of the T wave. Burst carriers have a
random phase per beat, so they are not a linear function of the ECG.

``LinearFilter`` coupling adds a fixed FIR filtering of the ECG to the PCG,
``NonlinearAmplitude`` scales each burst by a saturating function of the local
ECG slope. The shape constants below are illustrative, not normative.
"""

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidConfig
from .signal_io import BeatAnnotation, FiducialSet, Record, Scenario

__all__ = ["HrTrajectory", "Coupling", "SynthConfig", "CouplingTruth",
           "synth_coupled_record", "heart_rate_curve"]


class HrTrajectory(str, enum.Enum):
    CONSTANT = "Constant"
    RAMP_UP_DOWN = "RampUpDown"


class Coupling(str, enum.Enum):
    LINEAR_FILTER = "LinearFilter"
    NONLINEAR_AMPLITUDE = "NonlinearAmplitude"


# waveform constants (seconds / arbitrary units)
QRS_SIGMA = 0.016
QRS_HALF_WIDTH = 0.04
Q_OFFSET, Q_SIGMA, Q_AMP = 0.022, 0.006, -0.10
S_OFFSET, S_SIGMA, S_AMP = 0.024, 0.008, -0.20
P_OFFSET, P_SIGMA, P_AMP = 0.16, 0.03, 0.2
T_OFFSET, T_SIGMA, T_AMP = 0.28, 0.06, 0.40
S1_SIGMA, S1_CARRIER_HZ, S1_AMP = 0.015, 80.0, 1.0
S2_SIGMA, S2_CARRIER_HZ, S2_AMP = 0.012, 110.0, 0.7
S2_LAG = 0.02
BEAT_JITTER_S = 0.008
RESP_HZ = 0.25
FIR_TAPS = (0.6, 0.3, 0.1)
FIR_SPACING_S = 0.006


@dataclass(frozen=True)
class SynthConfig:
    duration_s: float = 60.0
    fs: int = 1000
    mean_hr_bpm: float = 60.0
    hr_trajectory: HrTrajectory = HrTrajectory.CONSTANT
    electromechanical_delay_s: float = 0.08
    coupling: Coupling = Coupling.LINEAR_FILTER
    noise_std: float = 0.0
    rng_seed: int = 0
    subject_id: str = "synth"

    def validate(self):
        if not self.duration_s > 0:
            raise InvalidConfig("duration_s must be positive")
        if not 20 <= self.mean_hr_bpm <= 220:
            raise InvalidConfig("mean_hr_bpm must lie in [20, 220]")
        if not 0 <= self.electromechanical_delay_s < 0.2:
            raise InvalidConfig("electromechanical_delay_s must lie in [0, 0.2)")
        if not self.noise_std >= 0:
            raise InvalidConfig("noise_std must be non-negative")
        if int(self.fs) != self.fs or self.fs < 300:
            raise InvalidConfig("fs must be an integer >= 300 Hz "
                                "(S2 bursts reach ~140 Hz)")
        HrTrajectory(self.hr_trajectory)
        Coupling(self.coupling)


@dataclass
class CouplingTruth:
    """Exact timing and components behind a synthetic record."""

    r_peaks: np.ndarray
    s1_times: np.ndarray
    s2_times: np.ndarray
    fiducials: FiducialSet
    burst_train: np.ndarray
    fir_taps: Optional[np.ndarray]
    fir_component: Optional[np.ndarray]


def heart_rate_curve(cfg, t):
    """Instantaneous heart rate (bpm) at times ``t``.

    ``RampUpDown`` rises linearly from 2/3 to 4/3 of ``mean_hr_bpm`` at
    mid-record and back, so the time-averaged rate equals ``mean_hr_bpm``
    (60 -> 120 -> 60 bpm for a mean of 90).
    """
    t = np.asarray(t, dtype=float)
    if HrTrajectory(cfg.hr_trajectory) is HrTrajectory.CONSTANT:
        return np.full_like(t, cfg.mean_hr_bpm)
    base, peak = cfg.mean_hr_bpm * 2 / 3, cfg.mean_hr_bpm * 4 / 3
    half = cfg.duration_s / 2
    frac = 1 - np.abs(np.clip(t, 0, cfg.duration_s) - half) / half
    return base + (peak - base) * frac


def _beat_times(cfg, rng):
    # beats where the integrated rate crosses k + 1/2; a margin of beats
    # outside the record keeps the edges stationary
    dt = 1e-3
    t = np.arange(-2.0, cfg.duration_s + 2.0 + dt, dt)
    phase = np.concatenate([[0.0], np.cumsum(heart_rate_curve(cfg, t[:-1]) / 60 * dt)])
    phase -= np.interp(0.0, t, phase)
    ks = np.arange(np.ceil(phase[0] - 0.5), np.floor(phase[-1] - 0.5) + 1) + 0.5
    beats = np.interp(ks, phase, t)
    jitter = np.clip(rng.normal(0, BEAT_JITTER_S, beats.size),
                     -2.5 * BEAT_JITTER_S, 2.5 * BEAT_JITTER_S)
    return beats + jitter


def _add_gaussian(out, fs, center, sigma, amp, carrier_hz=None, phase=0.0):
    n = out.size
    lo = max(int(np.floor((center - 5 * sigma) * fs)), 0)
    hi = min(int(np.ceil((center + 5 * sigma) * fs)) + 1, n)
    if hi <= lo:
        return
    tt = np.arange(lo, hi) / fs - center
    wave = amp * np.exp(-0.5 * (tt / sigma) ** 2)
    if carrier_hz is not None:
        wave = wave * np.cos(2 * np.pi * carrier_hz * tt + phase)
    out[lo:hi] += wave


def fir_kernel(fs, delay_s):
    """Delayed three-tap FIR used by LinearFilter coupling (minimum phase)."""
    d = int(round(delay_s * fs))
    m = max(int(round(FIR_SPACING_S * fs)), 1)
    h = np.zeros(d + 2 * m + 1)
    h[d], h[d + m], h[d + 2 * m] = FIR_TAPS
    return h


def synth_coupled_record(cfg):
    """Generate a synthetic record and the ground truth used to build it.

    Parameters
    ----------
    cfg : SynthConfig

    Returns
    -------
    record : Record
        Fiducials of every beat that lies fully inside the record.
    truth : CouplingTruth
    """
    cfg.validate()
    fs = int(cfg.fs)
    rng = np.random.default_rng(cfg.rng_seed)
    n = int(round(cfg.duration_s * fs))
    ecg = np.zeros(n)
    bursts = np.zeros(n)
    beats = _beat_times(cfg, rng)
    rr = np.diff(beats)
    rr = np.concatenate([rr, rr[-1:]])

    r_amp = (1 + 0.1 * np.sin(2 * np.pi * RESP_HZ * beats)
             + 0.03 * rng.standard_normal(beats.size))
    t_amp = T_AMP * (1 + 0.1 * np.cos(2 * np.pi * RESP_HZ * beats)
                     + 0.05 * rng.standard_normal(beats.size))
    phases = rng.uniform(0, 2 * np.pi, (beats.size, 2))

    annotations, s1, s2 = [], [], []
    layout = []
    for k, r in enumerate(beats):
        scale = np.sqrt(rr[k])
        t_peak = r + T_OFFSET * scale
        t_sigma = T_SIGMA * scale
        _add_gaussian(ecg, fs, r - P_OFFSET * scale, P_SIGMA, P_AMP)
        _add_gaussian(ecg, fs, r - Q_OFFSET, Q_SIGMA, Q_AMP * r_amp[k])
        _add_gaussian(ecg, fs, r, QRS_SIGMA, r_amp[k])
        _add_gaussian(ecg, fs, r + S_OFFSET, S_SIGMA, S_AMP * r_amp[k])
        _add_gaussian(ecg, fs, t_peak, t_sigma, t_amp[k])
        beat = BeatAnnotation(r - QRS_HALF_WIDTH, r, r + QRS_HALF_WIDTH,
                              t_peak - 2 * t_sigma, t_peak, t_peak + 2 * t_sigma)
        s1_t = r + cfg.electromechanical_delay_s
        s2_t = beat.t_off + S2_LAG
        layout.append((k, beat, s1_t, s2_t, t_sigma))
        if beat.qrs_on >= 0 and beat.t_off < n / fs and s2_t < n / fs:
            annotations.append(beat)
            s1.append(s1_t)
            s2.append(s2_t)

    coupling = Coupling(cfg.coupling)
    if coupling is Coupling.NONLINEAR_AMPLITUDE:
        # burst gain is a saturating function of the steepest ECG slope
        # of the QRS (S1) and of the T wave (S2)
        qrs_slope = r_amp / QRS_SIGMA
        t_slope = t_amp / np.array([sig for *_, sig in layout])
        g1 = np.tanh(1.5 * qrs_slope / np.median(qrs_slope)) / np.tanh(1.5)
        g2 = np.tanh(1.5 * t_slope / np.median(t_slope)) / np.tanh(1.5)
    else:
        g1 = np.ones(beats.size)
        g2 = np.ones(beats.size)
    for k, _, s1_t, s2_t, _ in layout:
        _add_gaussian(bursts, fs, s1_t, S1_SIGMA, S1_AMP * g1[k],
                      S1_CARRIER_HZ, phases[k, 0])
        _add_gaussian(bursts, fs, s2_t, S2_SIGMA, S2_AMP * g2[k],
                      S2_CARRIER_HZ, phases[k, 1])

    taps = fir_component = None
    if coupling is Coupling.LINEAR_FILTER:
        taps = fir_kernel(fs, cfg.electromechanical_delay_s)
        fir_component = np.convolve(ecg, taps)[:n]
        pcg = fir_component + bursts
    else:
        pcg = bursts.copy()
    if cfg.noise_std > 0:
        ecg = ecg + rng.normal(0, cfg.noise_std, n)
        pcg = pcg + rng.normal(0, cfg.noise_std, n)

    fid = FiducialSet(annotations)
    inside = (beats >= 0) & (beats < n / fs)
    record = Record(cfg.subject_id, Scenario.SYNTHETIC, fs, ecg, pcg, fid,
                    f"synthetic coupling={coupling.value} seed={cfg.rng_seed}")
    truth = CouplingTruth(beats[inside], np.array(s1), np.array(s2), fid,
                          bursts, taps, fir_component)
    return record, truth
