"""
Predicting envelopes instead of waveforms
=========================================

When heart-sound bursts have random carrier phase, the raw PCG cannot be
predicted sample by sample from the ECG, but its instantaneous amplitude can.
Here both targets are fitted with the same linear model.
"""

from ecgpcg.envelope import envelope_dataset, instantaneous_amplitude
from ecgpcg.metrics import evaluate
from ecgpcg.models import reconstruct, train
from ecgpcg.synthetic import Coupling, SynthConfig, synth_coupled_record
from ecgpcg.windowing import WindowScheme, build_dataset

fs = 500
cfgs = [SynthConfig(duration_s=60, fs=fs, rng_seed=s, noise_std=0.02,
                    coupling=Coupling.NONLINEAR_AMPLITUDE) for s in (7, 8)]
(train_rec, _), (test_rec, _) = (synth_coupled_record(c) for c in cfgs)
scheme = WindowScheme("NonCausal", 0.2)

raw = train("lasso", build_dataset(train_rec.ecg, train_rec.pcg, fs, scheme))
r = evaluate(test_rec.pcg, reconstruct(raw, test_rec.ecg, fs), fs)
print(f"raw PCG target:      coherence {r.weighted_coherence:.2f}, CC {r.cc:.2f}")

# the model remembers that it wants envelope inputs, so reconstruct() takes the raw ECG
env = train("lasso", envelope_dataset(train_rec.ecg, train_rec.pcg, fs, scheme))
r = evaluate(instantaneous_amplitude(test_rec.pcg), reconstruct(env, test_rec.ecg, fs), fs)
print(f"PCG envelope target: coherence {r.weighted_coherence:.2f}, CC {r.cc:.2f}")
