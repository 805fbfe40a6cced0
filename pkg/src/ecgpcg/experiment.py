"""
Cross-validated reconstruction experiments driven by a manifest file.

A manifest is a flat ``key = value`` file::

    # inputs: repeat 'record' for files, 'synth' for synthetic configs
    record = data/subject01.csv
    synth = synth_a.cfg
    direction = PcgToEcg
    scheme.kind = NonCausal
    scheme.delta_t_s = 0.5
    model = lasso                  # lasso | mlp | lstm
    target = RawWaveform           # RawWaveform | Envelope
    protocol = CrossSubjectLOOCV   # or WithinSubject10Fold
    lam = 1e-4
    preprocess = true
    pre.target_fs = 500            # any PreprocessConfig field
    train.epochs = 10              # any TrainConfig field
    out = results

Relative paths resolve against the manifest's directory. Each fold writes
``folds/<fold>.json`` (metrics), ``models/<fold>.model`` and
``recon/<fold>.npy`` (test reconstruction); ``aggregate.json`` holds the
mean and standard deviation over successful folds and is byte-identical for
identical manifests.
"""

import dataclasses
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import (config_hash, dataclass_from_kv, dataclass_to_kv, load_kv,
                     parse_enum)
from .envelope import envelope_dataset, instantaneous_amplitude
from .errors import EcgPcgError, InvalidConfig
from .metrics import evaluate
from .models import DEFAULT_LAMBDA, reconstruct, save_model, train
from .models.training import TrainConfig
from .preprocess import PreprocessConfig, preprocess_pipeline
from .signal_io import load_record
from .synthetic import SynthConfig, synth_coupled_record
from .windowing import (DEFAULT_STRIDE_S, Direction, Protocol, TargetKind,
                        WindowKind, WindowScheme, build_dataset, concat_datasets,
                        cross_subject_splits, within_subject_folds)

__all__ = ["ExperimentManifest", "load_manifest", "run_experiment",
           "load_inputs", "provenance", "METRIC_KEYS"]

log = logging.getLogger(__name__)

METRIC_KEYS = ("snr_db", "cc", "weighted_coherence")
MODEL_KINDS = ("lasso", "mlp", "lstm")


@dataclass
class ExperimentManifest:
    records: list = field(default_factory=list)  # paths or SynthConfig
    direction: Direction = Direction.PCG_TO_ECG
    scheme: WindowScheme = WindowScheme()
    model_kind: str = "lasso"
    target_kind: TargetKind = TargetKind.RAW_WAVEFORM
    protocol: Protocol = Protocol.CROSS_SUBJECT_LOOCV
    preprocess: Optional[PreprocessConfig] = PreprocessConfig()
    train: TrainConfig = TrainConfig()
    lam: float = DEFAULT_LAMBDA
    stride_s: float = DEFAULT_STRIDE_S
    segment_len_s: float = 180.0
    n_folds: int = 10
    guard_s: float = 1.0
    out_dir: str = "results"
    jobs: int = 1

    def __post_init__(self):
        self.direction = Direction(self.direction)
        self.target_kind = TargetKind(self.target_kind)
        self.protocol = Protocol(self.protocol)
        self.model_kind = str(self.model_kind).lower()
        if self.model_kind not in MODEL_KINDS:
            raise InvalidConfig(f"model must be one of {MODEL_KINDS}")
        if not self.records:
            raise InvalidConfig("manifest lists no records")

    def canonical(self):
        """Stable text form used for the config hash (excludes out_dir, jobs)."""
        lines = []
        for r in self.records:
            if isinstance(r, SynthConfig):
                lines.append("synth:" + dataclass_to_kv(r).replace("\n", ";"))
            else:
                lines.append(f"record:{Path(r).name}")
        lines += [f"direction={self.direction.value}",
                  f"scheme={self.scheme.kind.value},{self.scheme.delta_t_s!r}",
                  f"model={self.model_kind}", f"target={self.target_kind.value}",
                  f"protocol={self.protocol.value}", f"lam={self.lam!r}",
                  f"stride_s={self.stride_s!r}", f"segment_len_s={self.segment_len_s!r}",
                  f"n_folds={self.n_folds}", f"guard_s={self.guard_s!r}"]
        lines.append("pre:" + (dataclass_to_kv(self.preprocess) if self.preprocess
                               else "none"))
        lines.append("train:" + dataclass_to_kv(self.train))
        return "\n".join(lines)


def _flag(value):
    return value.strip().lower() in ("1", "true", "yes", "on")


def load_manifest(path):
    path = Path(path)
    base = path.parent
    items = load_kv(path)
    records, pre, trn, rest = [], {}, {}, {}
    for key, value in items:
        if key == "record":
            records.append(str(base / value))
        elif key == "synth":
            mapping = dict(load_kv(base / value))
            records.append(dataclass_from_kv(SynthConfig, mapping))
        elif key.startswith("pre."):
            pre[key] = value
        elif key.startswith("train."):
            trn[key] = value
        else:
            rest[key] = value
    known = {"direction", "scheme.kind", "scheme.delta_t_s", "model", "target",
             "protocol", "lam", "stride_s", "segment_len_s", "n_folds", "guard_s",
             "out", "jobs", "preprocess"}
    unknown = set(rest) - known
    if unknown:
        raise InvalidConfig(f"unknown manifest keys: {sorted(unknown)}")
    kwargs = {"records": records}
    scheme = {}
    if "scheme.kind" in rest:
        scheme["kind"] = parse_enum(WindowKind, rest["scheme.kind"])
    if "scheme.delta_t_s" in rest:
        scheme["delta_t_s"] = float(rest["scheme.delta_t_s"])
    kwargs["scheme"] = WindowScheme(**scheme)
    enum_keys = {"direction": ("direction", Direction), "target": ("target_kind", TargetKind),
                 "protocol": ("protocol", Protocol)}
    for key, (name, tp) in enum_keys.items():
        if key in rest:
            kwargs[name] = parse_enum(tp, rest[key])
    for key, name, tp in [("model", "model_kind", str), ("lam", "lam", float),
                          ("stride_s", "stride_s", float),
                          ("segment_len_s", "segment_len_s", float),
                          ("n_folds", "n_folds", int), ("guard_s", "guard_s", float),
                          ("jobs", "jobs", int)]:
        if key in rest:
            try:
                kwargs[name] = tp(rest[key])
            except ValueError as exc:
                raise InvalidConfig(f"{key}: cannot parse {rest[key]!r}") from exc
    if "out" in rest:
        kwargs["out_dir"] = str(base / rest["out"])
    if "preprocess" in rest and not _flag(rest["preprocess"]):
        kwargs["preprocess"] = None
    else:
        kwargs["preprocess"] = dataclass_from_kv(PreprocessConfig, pre, "pre.")
    kwargs["train"] = dataclass_from_kv(TrainConfig, trn, "train.")
    return ExperimentManifest(**kwargs)


def provenance(manifest_or_text, seed=None):
    text = (manifest_or_text if isinstance(manifest_or_text, str)
            else manifest_or_text.canonical())
    if seed is None and not isinstance(manifest_or_text, str):
        seed = manifest_or_text.train.rng_seed
    return {"config_hash": config_hash(text), "seed": seed,
            "tool": "ecgpcg", "version": __version__}


# --------------------------------------------------------------------------
# folds


def load_inputs(manifest):
    """Load (and optionally preprocess) every record of the manifest."""
    out = []
    for item in manifest.records:
        rec = synth_coupled_record(item)[0] if isinstance(item, SynthConfig) \
            else load_record(item)
        if manifest.preprocess is not None:
            rec = preprocess_pipeline(rec, manifest.preprocess)
        out.append(rec)
    return out


def _pair_signals(manifest, rec):
    src = rec.channel(manifest.direction.source)
    tgt = rec.channel(manifest.direction.target)
    return src, tgt


def _dataset(manifest, src, tgt, fs):
    if manifest.target_kind is TargetKind.ENVELOPE:
        return envelope_dataset(src, tgt, fs, manifest.scheme, manifest.stride_s,
                                direction=manifest.direction)
    return build_dataset(src, tgt, fs, manifest.scheme, manifest.stride_s,
                         direction=manifest.direction)


def _fold_specs(manifest, records):
    """List of (fold_id, record_index, train_spec) in a fixed order."""
    specs = []
    if manifest.protocol is Protocol.CROSS_SUBJECT_LOOCV:
        plan = cross_subject_splits(len(records))
        for k, (train_units, test_units) in enumerate(plan.folds):
            specs.append({"fold": f"fold{k:02d}", "index": k,
                          "test_record": int(test_units[0]),
                          "train_records": [int(u) for u in train_units]})
    else:
        for r, rec in enumerate(records):
            plan = within_subject_folds(rec.duration, manifest.segment_len_s,
                                        manifest.n_folds)
            for k, (_, test_units) in enumerate(plan.folds):
                start, end = plan.segments[int(test_units[0])]
                specs.append({"fold": f"rec{r:02d}_fold{k:02d}",
                              "index": len(specs), "test_record": r,
                              "segment": [float(start), float(end)]})
    return specs


def _run_fold(manifest, records, spec):
    fs = records[spec["test_record"]].fs
    cfg = dataclasses.replace(manifest.train,
                              rng_seed=manifest.train.rng_seed + spec["index"])
    if "segment" in spec:
        rec = records[spec["test_record"]]
        src, tgt = _pair_signals(manifest, rec)
        start, end = spec["segment"]
        full = _dataset(manifest, src, tgt, fs)
        # purge every row whose window touches the test segment
        ds = full.subset(~full.window_overlaps(start, end), copy=False)
        lo, hi = int(round(start * fs)), int(round(end * fs))
        test_src, test_tgt = src[lo:hi], tgt[lo:hi]
    else:
        parts = []
        for r in spec["train_records"]:
            rec = records[r]
            if rec.fs != fs:
                raise InvalidConfig("all records must share one sampling rate")
            parts.append(_dataset(manifest, *_pair_signals(manifest, rec), fs))
        ds = concat_datasets(parts, copy=False)
        test_src, test_tgt = _pair_signals(manifest, records[spec["test_record"]])
    model = train(manifest.model_kind, ds, cfg, manifest.lam)
    x_hat = reconstruct(model, test_src, fs)
    ref = (instantaneous_amplitude(test_tgt)
           if manifest.target_kind is TargetKind.ENVELOPE else test_tgt)
    report = evaluate(ref, x_hat, fs, manifest.guard_s)
    return model, x_hat, report, cfg.rng_seed


def _fold_worker(args):
    manifest, records, spec = args
    try:
        model, x_hat, report, seed = _run_fold(manifest, records, spec)
    except (EcgPcgError, ValueError, ArithmeticError) as exc:
        log.warning("fold %s failed: %s", spec["fold"], exc)
        return spec, None, None, {"type": type(exc).__name__, "message": str(exc)}, None
    return spec, model, x_hat, report, seed


def _summary(values):
    arr = np.asarray(values, dtype=float)
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    mean = float(np.mean(arr))
    return {"mean": mean, "std": std, "text": f"{mean:.2f} ± {std:.2f}"}


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n",
                          encoding="utf-8")


def run_experiment(manifest, records=None):
    """Run every fold and write the result bundle.

    Returns
    -------
    dict
        The aggregate payload (also written to ``aggregate.json``).
    """
    if records is None:
        records = load_inputs(manifest)
    specs = _fold_specs(manifest, records)
    out = Path(manifest.out_dir)
    for sub in ("folds", "models", "recon"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    prov = provenance(manifest)
    jobs = [(manifest, records, spec) for spec in specs]
    if manifest.jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=manifest.jobs) as pool:
            results = list(pool.map(_fold_worker, jobs))
    else:
        results = [_fold_worker(job) for job in jobs]

    good, failed = [], []
    for spec, model, x_hat, report, seed in results:
        rec = records[spec["test_record"]]
        info = {"fold": spec["fold"], "test_record": rec.subject_id,
                "provenance": dict(prov, seed=seed)}
        if "segment" in spec:
            info["test_segment_s"] = spec["segment"]
        if model is None:
            info["error"] = report
            failed.append(spec["fold"])
            _write_json(out / "folds" / f"{spec['fold']}.json", info)
            continue
        save_model(out / "models" / f"{spec['fold']}.model", model)
        np.save(out / "recon" / f"{spec['fold']}.npy", x_hat)
        info.update(report.to_dict())
        _write_json(out / "folds" / f"{spec['fold']}.json", info)
        good.append(report)

    aggregate = {
        "provenance": prov,
        "protocol": manifest.protocol.value,
        "direction": manifest.direction.value,
        "scheme": manifest.scheme.to_dict(),
        "model": manifest.model_kind,
        "target_kind": manifest.target_kind.value,
        "n_folds": len(specs),
        "n_succeeded": len(good),
        "failed_folds": failed,
        "folds": [s["fold"] for s in specs],
    }
    if good:
        aggregate["metrics"] = {k: _summary([getattr(r, k) for r in good])
                                for k in METRIC_KEYS}
    _write_json(out / "aggregate.json", aggregate)
    return aggregate
