import numpy as np
import pytest

from ecgpcg.errors import InvalidConfig
from ecgpcg.fiducial import detect_rpeaks
from ecgpcg.synthetic import (Coupling, HrTrajectory, SynthConfig, fir_kernel,
                              heart_rate_curve, synth_coupled_record)


def test_60_bpm_for_60_s_gives_60_beats(linear_record):
    rec, truth = linear_record
    assert abs(len(truth.r_peaks) - 60) <= 1
    assert np.mean(np.diff(truth.r_peaks)) == pytest.approx(1.0, rel=0.01)
    assert rec.fiducials is not None and len(rec.fiducials) >= 58


def test_deterministic_given_seed():
    cfg = SynthConfig(duration_s=10, rng_seed=5, noise_std=0.05)
    a, _ = synth_coupled_record(cfg)
    b, _ = synth_coupled_record(cfg)
    assert a == b
    c, _ = synth_coupled_record(SynthConfig(duration_s=10, rng_seed=6, noise_std=0.05))
    assert not np.array_equal(a.ecg, c.ecg)


@pytest.mark.parametrize("hr", [45.0, 75.0, 140.0])
def test_mean_rr_matches_rate(hr):
    _, truth = synth_coupled_record(SynthConfig(duration_s=120, mean_hr_bpm=hr))
    assert np.mean(np.diff(truth.r_peaks)) == pytest.approx(60 / hr, rel=0.01)


def test_ramp_reaches_half_second_rr_mid_record():
    cfg = SynthConfig(duration_s=120, mean_hr_bpm=90,
                      hr_trajectory=HrTrajectory.RAMP_UP_DOWN)
    assert heart_rate_curve(cfg, [0.0, 60.0, 120.0]) == pytest.approx([60, 120, 60])
    rec, _ = synth_coupled_record(cfg)
    peaks = detect_rpeaks(rec.ecg, rec.fs)
    rr = np.diff(peaks)
    mid = (peaks[1:] > 50) & (peaks[1:] < 70)
    assert np.median(rr[mid]) == pytest.approx(0.5, abs=0.03)
    assert rr[0] == pytest.approx(1.0, abs=0.05)


def test_linear_coupling_is_exact_fir_of_ecg(linear_record):
    rec, truth = linear_record
    expected = np.convolve(rec.ecg, fir_kernel(rec.fs, 0.08))[:rec.n_samples]
    assert np.allclose(rec.pcg - truth.burst_train, truth.fir_component, rtol=0, atol=1e-12)
    assert np.allclose(truth.fir_component, expected, atol=1e-12)


def test_s1_follows_r_by_the_delay(linear_record):
    rec, truth = linear_record
    fid_r = rec.fiducials.times_of("r_peak")
    assert np.allclose(truth.s1_times - fid_r, 0.08)


def test_nonlinear_pcg_has_no_linear_ecg_copy(nonlinear_record):
    rec, truth = nonlinear_record
    assert truth.fir_taps is None
    assert np.array_equal(rec.pcg, truth.burst_train)


def test_fiducials_are_valid_and_inside(linear_record):
    rec, _ = linear_record
    t = rec.fiducials.all_times()
    assert t.min() >= 0 and t.max() < rec.duration


@pytest.mark.parametrize("kwargs", [
    {"duration_s": 0}, {"mean_hr_bpm": 10}, {"mean_hr_bpm": 300},
    {"electromechanical_delay_s": 0.2}, {"noise_std": -1}, {"fs": 200},
])
def test_invalid_config(kwargs):
    with pytest.raises(InvalidConfig):
        synth_coupled_record(SynthConfig(**kwargs))


def test_coupling_enum_round_trip():
    assert Coupling("NonlinearAmplitude") is Coupling.NONLINEAR_AMPLITUDE
