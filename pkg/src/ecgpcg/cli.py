"""
Command-line entry point.

Each subcommand wraps one library operation. Failures print a JSON object
(``error``, ``message`` and, for pipeline stages, ``stage``/``channel``) to
stderr and exit with status 1.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import config_hash, dataclass_from_kv, load_kv
from .envelope import instantaneous_amplitude
from .errors import EcgPcgError, InvalidConfig, StageError
from .experiment import load_manifest, run_experiment
from .fiducial import biomarker_errors, error_table, format_error_table
from .metrics import evaluate, welch_psd
from .models import TrainConfig, load_model, reconstruct, save_model, train
from .models.training import ParameterScale
from .preprocess import PreprocessConfig, preprocess_pipeline
from .signal_io import RecordFormat, load_fiducials, load_record, write_record
from .synthetic import SynthConfig, synth_coupled_record
from .windowing import (Direction, TargetKind, WindowKind, WindowScheme,
                        build_dataset, read_dataset, write_dataset)
from .envelope import envelope_dataset

log = logging.getLogger("ecgpcg")

DIRECTIONS = {"e2p": Direction.ECG_TO_PCG, "p2e": Direction.PCG_TO_ECG}
SCALES = {"within": ParameterScale.WITHIN_SUBJECT, "cross": ParameterScale.CROSS_SUBJECT}
KINDS = {"causal": WindowKind.CAUSAL, "anticausal": WindowKind.ANTI_CAUSAL,
         "noncausal": WindowKind.NON_CAUSAL}


def _provenance(args, seed=None):
    params = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {"config_hash": config_hash(json.dumps(params, sort_keys=True, default=str)),
            "seed": seed, "tool": "ecgpcg", "version": __version__}


def _prov_lines(prov, **extra):
    return "\n".join(f"{k}={v}" for k, v in {**prov, **extra}.items())


def _kv_file(path):
    return dict(load_kv(path)) if path else {}


def _record_format(path):
    return RecordFormat.RAW_BINARY_PAIR if Path(path).suffix in (".bin", ".rec") \
        else RecordFormat.PAIRED_CSV


def _write_json(path, payload):
    text = json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _prov_get(record, key):
    for line in record.provenance.split("\n"):
        if line.startswith(key + "="):
            return line.split("=", 1)[1]
    return None


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(args):
    cfg = dataclass_from_kv(SynthConfig, _kv_file(args.config))
    rec, _ = synth_coupled_record(cfg)
    prov = _provenance(args, cfg.rng_seed)
    rec = replace(rec, provenance=_prov_lines(prov, coupling=cfg.coupling.value))
    write_record(args.out, rec, _record_format(args.out))


def cmd_preprocess(args):
    cfg = dataclass_from_kv(PreprocessConfig, _kv_file(args.config))
    rec = preprocess_pipeline(load_record(args.input), cfg)
    rec = replace(rec, provenance=_prov_lines(_provenance(args)))
    write_record(args.out, rec, _record_format(args.out))


def cmd_dataset(args):
    rec = load_record(args.input)
    direction = DIRECTIONS[args.direction]
    scheme = WindowScheme(KINDS[args.scheme], args.delta_t)
    src, tgt = rec.channel(direction.source), rec.channel(direction.target)
    if args.target == "envelope":
        ds = envelope_dataset(src, tgt, rec.fs, scheme, args.stride, direction=direction)
    else:
        ds = build_dataset(src, tgt, rec.fs, scheme, args.stride, direction=direction)
    write_dataset(args.out, ds)


def cmd_train(args):
    ds = read_dataset(args.dataset)
    cfg = dataclass_from_kv(TrainConfig, _kv_file(args.config))
    cfg = replace(cfg, parameter_scale=SCALES[args.scale])
    if args.seed is not None:
        cfg = replace(cfg, rng_seed=args.seed)
    model = train(args.model, ds, cfg, lam=args.lam)
    model.meta["provenance"] = _provenance(args, cfg.rng_seed)
    save_model(args.out, model)


def cmd_reconstruct(args):
    model = load_model(args.model)
    rec = load_record(args.input)
    direction = DIRECTIONS[args.direction]
    trained = model.meta.get("direction")
    if trained and trained != direction.value:
        raise InvalidConfig(f"model was trained for {trained}, not {direction.value}")
    if model.meta.get("fs") and float(model.meta["fs"]) != rec.fs:
        raise InvalidConfig(f"model expects fs={model.meta['fs']}, record has {rec.fs}")
    x_hat = reconstruct(model, rec.channel(direction.source), rec.fs)
    prov = _prov_lines(_provenance(args, model.meta.get("train_config", {}).get("rng_seed")),
                       reconstructed_channel=direction.target,
                       target_kind=model.meta.get("target_kind", "RawWaveform"))
    out = replace(rec, provenance=prov, fiducials=None, **{direction.target: x_hat})
    write_record(args.out, out, _record_format(args.out))


def cmd_evaluate(args):
    ref, hat = load_record(args.ref), load_record(args.hat)
    if ref.fs != hat.fs:
        raise InvalidConfig(f"sampling rates differ: {ref.fs} vs {hat.fs}")
    channel = args.channel or _prov_get(hat, "reconstructed_channel") or "ecg"
    envelope = args.envelope or _prov_get(hat, "target_kind") == TargetKind.ENVELOPE.value
    x = ref.channel(channel)
    if envelope:
        x = instantaneous_amplitude(x)
    report = evaluate(x, hat.channel(channel), ref.fs, args.guard)
    payload = report.to_dict()
    payload.update(channel=channel, envelope=bool(envelope), provenance=_provenance(args))
    _write_json(args.out, payload)


def cmd_psd(args):
    rec = load_record(args.input)
    spec = welch_psd(rec.channel(args.channel), rec.fs, args.window, args.overlap)
    lines = [f"# {ln}" for ln in _prov_lines(_provenance(args)).split("\n")]
    lines.append("freq_hz,psd")
    lines += [f"{f!r},{p!r}" for f, p in zip(spec.freqs.tolist(), spec.values.tolist())]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_fiducial_eval(args):
    ref, det = load_fiducials(args.ref), load_fiducials(args.det)
    table = error_table(ref, det, args.tol)
    text = format_error_table(table, _provenance(args))
    Path(args.out).write_text(text, encoding="utf-8")
    if args.biomarkers:
        payload = biomarker_errors(ref, det, args.tol)
        payload["provenance"] = _provenance(args)
        _write_json(args.biomarkers, payload)


def cmd_experiment(args):
    manifest = load_manifest(args.manifest)
    if args.jobs is not None:
        manifest = replace(manifest, jobs=args.jobs)
    if args.out is not None:
        manifest = replace(manifest, out_dir=args.out)
    agg = run_experiment(manifest)
    print(json.dumps({"out_dir": manifest.out_dir, "n_folds": agg["n_folds"],
                      "failed_folds": agg["failed_folds"]}))


# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="ecgpcg", description=__doc__.split("\n")[1])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic ECG/PCG record")
    s.add_argument("--config", help="key = value file with SynthConfig fields")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("preprocess", help="filter, clip, normalize and resample")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--config", help="key = value file with PreprocessConfig fields")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("dataset", help="build a windowed training cache")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--direction", choices=DIRECTIONS, required=True)
    s.add_argument("--scheme", choices=KINDS, default="noncausal")
    s.add_argument("--delta-t", type=float, default=0.5)
    s.add_argument("--stride", type=float, default=0.008)
    s.add_argument("--target", choices=("raw", "envelope"), default="raw")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_dataset)

    s = sub.add_parser("train", help="fit a model to a dataset cache")
    s.add_argument("--dataset", required=True)
    s.add_argument("--model", choices=("lasso", "mlp", "lstm"), required=True)
    s.add_argument("--scale", choices=SCALES, default="within")
    s.add_argument("--config", help="key = value file with TrainConfig fields")
    s.add_argument("--lam", type=float, default=1e-4)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("reconstruct", help="predict one channel from the other")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--direction", choices=DIRECTIONS, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("evaluate", help="SNR, CC and coherence of a reconstruction")
    s.add_argument("--ref", required=True)
    s.add_argument("--hat", required=True)
    s.add_argument("--channel", choices=("ecg", "pcg"))
    s.add_argument("--envelope", action="store_true",
                   help="compare against the envelope of the reference")
    s.add_argument("--guard", type=float, default=1.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("psd", help="export a Welch spectrum as CSV")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--channel", choices=("ecg", "pcg"), required=True)
    s.add_argument("--window", type=float, default=1.0)
    s.add_argument("--overlap", type=float, default=0.5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_psd)

    s = sub.add_parser("fiducial-eval", help="fiducial error table as CSV")
    s.add_argument("--ref", required=True)
    s.add_argument("--det", required=True)
    s.add_argument("--tol", type=float, default=0.2)
    s.add_argument("--out", required=True)
    s.add_argument("--biomarkers", help="also write QT/QRS errors to this JSON file")
    s.set_defaults(func=cmd_fiducial_eval)

    s = sub.add_parser("experiment", help="run a cross-validation manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--jobs", type=int)
    s.add_argument("--out", help="override the manifest's output directory")
    s.set_defaults(func=cmd_experiment)
    return p


def _error_payload(exc):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, StageError):
        payload.update(stage=exc.stage, channel=exc.channel,
                       cause=type(exc.cause).__name__)
    return payload


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (EcgPcgError, ValueError, ArithmeticError, OSError) as exc:
        sys.stderr.write(json.dumps(_error_payload(exc)) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
