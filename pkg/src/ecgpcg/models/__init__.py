"""
Cross-modal regressors: LASSO, two-layer network and two-layer LSTM.

Every model maps one input window to one target sample. ``train`` records
the windowing metadata of its dataset in ``model.meta`` so that
``reconstruct`` can refuse inputs framed differently.
"""

import numpy as np

from ..envelope import instantaneous_amplitude
from ..errors import LengthMismatch, SchemeMismatch
from ..windowing import TargetKind, WindowScheme, build_dataset
from .lasso import (LinearLassoModel, coordinate_descent, lasso_objective,
                    soft_threshold, train_lasso)
from .lstm import LstmModel
from .mlp import MlpModel
from .serialize import load_model, save_model
from .training import ParameterScale, TrainConfig, fit, train_lstm, train_mlp

__all__ = [
    "LinearLassoModel", "MlpModel", "LstmModel", "TrainConfig", "ParameterScale",
    "train", "train_lasso", "train_mlp", "train_lstm", "fit", "predict",
    "reconstruct", "grad_check", "save_model", "load_model", "soft_threshold",
    "lasso_objective", "coordinate_descent", "DEFAULT_LAMBDA",
]

DEFAULT_LAMBDA = 1e-4


def _stamp(model, ds, envelope_inputs):
    model.meta.update({
        "scheme": ds.scheme.to_dict(),
        "fs": float(ds.fs),
        "target_kind": ds.target_kind.value,
        "direction": ds.source_direction.value if ds.source_direction else None,
        "envelope_inputs": bool(envelope_inputs),
    })
    return model


def train(kind, ds, cfg=TrainConfig(), lam=DEFAULT_LAMBDA, envelope_inputs=None):
    """Train a model of ``kind`` ('lasso', 'mlp' or 'lstm') on ``ds``."""
    if envelope_inputs is None:
        envelope_inputs = ds.target_kind is TargetKind.ENVELOPE
    if kind == "lasso":
        model = train_lasso(ds, lam)
        model.meta["train_config"] = {"rng_seed": cfg.rng_seed, "lam": lam}
    elif kind == "mlp":
        model = train_mlp(ds, cfg)
    elif kind == "lstm":
        model = train_lstm(ds, cfg)
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    return _stamp(model, ds, envelope_inputs)


def predict(model, window):
    """Scalar prediction for one input window (dropout never applies)."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 1 or window.size != model.input_len:
        raise LengthMismatch(f"window of {window.size} samples, model expects "
                             f"{model.input_len}")
    return float(model.predict_batch(window[None, :])[0])


def reconstruct(model, input_series, fs, scheme=None, chunk=4096):
    """Predict the target at every sample whose window fits in the record.

    Samples without a full window are left at 0; the 1 s evaluation guard
    excludes them when ``scheme.delta_t_s <= 1``. Models trained on envelope
    inputs get the envelope of ``input_series`` automatically.
    """
    x = np.asarray(input_series, dtype=float)
    stamped = model.meta.get("scheme")
    if scheme is None:
        if stamped is None:
            raise SchemeMismatch("model carries no scheme; pass one explicitly")
        scheme = WindowScheme(**stamped)
    if stamped is not None and WindowScheme(**stamped) != scheme:
        raise SchemeMismatch(f"model trained with {stamped}, got {scheme.to_dict()}")
    if scheme.input_len(fs) != model.input_len:
        raise SchemeMismatch(f"scheme gives {scheme.input_len(fs)}-sample windows at "
                             f"{fs} Hz, model expects {model.input_len}")
    if model.meta.get("envelope_inputs"):
        x = instantaneous_amplitude(x)
    out = np.zeros_like(x)
    ds = build_dataset(x, x, fs, scheme, 1.0 / fs)
    idx = np.round(ds.target_times * fs).astype(int)
    for s in range(0, len(idx), chunk):
        out[idx[s:s + chunk]] = model.predict_batch(ds.inputs[s:s + chunk])
    return out


def _relative_errors(analytic, numeric, floor):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(model_kind, sample=None, epsilon=1e-5, n_params=64, seed=0,
               model=None, floor=1e-6, return_count=False):
    """Largest relative error between analytic and central-difference gradients.

    The loss is the mean squared error on ``sample = (X, y)`` (a small
    random batch by default), with dropout disabled. For ``'lasso'`` the
    squared-error part plus the L1 term is checked at weights kept away from
    zero, where the objective is differentiable.

    Parameters are drawn at random; a draw whose +-epsilon perturbation moves
    any unit across an activation breakpoint is skipped, since the loss is
    not differentiable across it. The relative error is
    ``|a - n| / max(|a|, |n|, floor)``: at ``epsilon = 1e-5`` the central
    difference carries roughly ``1e-11 * loss`` of rounding error, so
    gradients far below ``floor`` cannot be resolved.

    With ``return_count=True`` the number of parameters actually compared
    is returned as well.
    """
    rng = np.random.default_rng(seed)
    if model is None:
        if model_kind == "mlp":
            model = MlpModel(40, seed=seed)
        elif model_kind == "lstm":
            model = LstmModel(16, hidden=(24, 12), dense=8, seed=seed)
        elif model_kind == "lasso":
            model = LinearLassoModel(rng.uniform(0.5, 1.5, 20) * rng.choice([-1, 1], 20),
                                     0.3, 0.05)
        else:
            raise ValueError(f"unknown model kind {model_kind!r}")
    if sample is None:
        X = rng.standard_normal((8, model.input_len))
        y = rng.standard_normal(8)
    else:
        X, y = (np.asarray(a, dtype=float) for a in sample)

    if isinstance(model, LinearLassoModel):
        def loss():
            return lasso_objective(X, y, model.weights, model.bias, model.lam)

        def pattern():
            return model.weights > 0

        r = y - model.bias - X @ model.weights
        grads = {"weights": -(X.T @ r) / len(y) + model.lam * np.sign(model.weights)}
        params = {"weights": model.weights}
    else:
        def loss():
            out = model.forward(X)[0]
            return float(np.mean((out - y) ** 2))

        def pattern():
            return model.kink_pattern(X)

        out, cache = model.forward(X)
        grads = model.backward(cache, 2.0 * (out - y) / len(y))
        params = model.params

    names = list(params)
    sizes = np.array([params[k].size for k in names])
    bounds = np.cumsum(sizes)
    base = pattern()
    analytic, numeric = [], []
    for flat_index in rng.permutation(bounds[-1]):
        if len(analytic) == n_params:
            break
        which = int(np.searchsorted(bounds, flat_index, side="right"))
        name = names[which]
        j = flat_index - (bounds[which] - sizes[which])
        view = params[name].reshape(-1)
        old = view[j]
        view[j] = old + epsilon
        up, smooth = loss(), np.array_equal(pattern(), base)
        view[j] = old - epsilon
        down, smooth = loss(), smooth and np.array_equal(pattern(), base)
        view[j] = old
        if smooth:
            numeric.append((up - down) / (2 * epsilon))
            analytic.append(grads[name].reshape(-1)[j])
    worst = float(np.max(_relative_errors(analytic, numeric, floor)))
    return (worst, len(analytic)) if return_count else worst
