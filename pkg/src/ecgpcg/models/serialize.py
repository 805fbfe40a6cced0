"""
Self-describing model files.

Layout: ``ECGPCGM1`` magic, little-endian uint32 header size, UTF-8 JSON
header (kind, architecture, shape table, training-config echo, seed,
windowing metadata) and then every parameter array as little-endian float64
in shape-table order.
"""

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import IoFailure, MalformedFile
from .lasso import LinearLassoModel
from .lstm import LstmModel
from .mlp import MlpModel

__all__ = ["save_model", "load_model"]

_MAGIC = b"ECGPCGM1"


def _param_table(model):
    if isinstance(model, LinearLassoModel):
        return model.params()
    return model.params


def save_model(path, model):
    params = _param_table(model)
    config = ({"input_len": model.input_len, "lam": model.lam}
              if isinstance(model, LinearLassoModel) else model.config())
    header = {
        "kind": model.kind,
        "config": config,
        "shapes": [[name, list(arr.shape)] for name, arr in params.items()],
        "meta": model.meta,
        "seed": model.meta.get("train_config", {}).get("rng_seed"),
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(a, "<f8").tobytes() for a in params.values())
    try:
        with open(path, "wb") as fh:
            fh.write(_MAGIC + struct.pack("<I", len(raw)) + raw + body)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_model(path):
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise MalformedFile(f"cannot read {path}: {exc}") from exc
    if not blob.startswith(_MAGIC):
        raise MalformedFile(f"{path}: not a model file")
    off = len(_MAGIC)
    (hlen,) = struct.unpack_from("<I", blob, off)
    off += 4
    try:
        header = json.loads(blob[off:off + hlen])
        kind, shapes, config = header["kind"], header["shapes"], header["config"]
    except (ValueError, KeyError) as exc:
        raise MalformedFile(f"{path}: bad header") from exc
    off += hlen
    params = {}
    for name, shape in shapes:
        count = int(np.prod(shape)) if shape else 1
        if off + 8 * count > len(blob):
            raise MalformedFile(f"{path}: truncated parameter {name}")
        params[name] = np.frombuffer(blob, "<f8", count, off).reshape(shape).copy()
        off += 8 * count
    if off != len(blob):
        raise MalformedFile(f"{path}: trailing bytes after parameters")
    meta = header.get("meta", {})
    if kind == "lasso":
        return LinearLassoModel(params["weights"], float(params["bias"][0]),
                                config["lam"], config["input_len"], meta)
    if kind == "mlp":
        return MlpModel(config["input_len"], config["hidden"],
                        config["dropout_rate"], params=params, meta=meta)
    if kind == "lstm":
        return LstmModel(config["input_len"], config["hidden"], config["dense"],
                         config["frame_len"], config["dropout_rate"],
                         params=params, meta=meta)
    raise MalformedFile(f"{path}: unknown model kind {kind!r}")
