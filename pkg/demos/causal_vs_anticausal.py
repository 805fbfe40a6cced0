"""
Which side of the window carries the information?
=================================================

The PCG follows the ECG by an electromechanical delay, so the ECG is best
predicted from PCG samples that come *after* it (an anti-causal window), and
the PCG from ECG samples that come *before* it (a causal window). Fitting
both window kinds in both directions shows the sign pattern.
"""

from ecgpcg.metrics import evaluate
from ecgpcg.models import reconstruct, train
from ecgpcg.synthetic import SynthConfig, synth_coupled_record
from ecgpcg.windowing import Direction, WindowScheme, build_dataset

fs = 500
cfg = SynthConfig(duration_s=120, fs=fs, electromechanical_delay_s=0.08)
train_rec, _ = synth_coupled_record(cfg)
test_rec, _ = synth_coupled_record(SynthConfig(**{**cfg.__dict__, "rng_seed": 1}))

for direction in Direction:
    src, tgt = direction.source, direction.target
    cc = {}
    for kind in ("Causal", "AntiCausal"):
        scheme = WindowScheme(kind, 0.5)
        ds = build_dataset(train_rec.channel(src), train_rec.channel(tgt), fs, scheme)
        model = train("lasso", ds)
        hat = reconstruct(model, test_rec.channel(src), fs)
        cc[kind] = evaluate(test_rec.channel(tgt), hat, fs).cc
    print(f"{direction.value:10s} causal CC {cc['Causal']:.2f}  anti-causal CC "
          f"{cc['AntiCausal']:.2f}  difference {cc['Causal'] - cc['AntiCausal']:+.2f}")
