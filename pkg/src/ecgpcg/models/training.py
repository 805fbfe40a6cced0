"""
Mini-batch training of the neural regressors.

Loss is the mean squared error, minimized with Adam. The step size follows
a half-cosine decay from ``learning_rate`` to a tenth of it over the epoch
budget (``schedule='constant'`` disables the decay). The last
``val_fraction`` of the (time-ordered) rows is held out for early stopping;
the parameters of the best validation epoch are kept.
"""

import enum
import logging
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np

from ..errors import DivergedTraining, EmptyDataset, NonFiniteFeature
from .layers import Adam, clip_global_norm
from .lstm import LstmModel
from .mlp import MlpModel

__all__ = ["ParameterScale", "TrainConfig", "fit", "train_mlp", "train_lstm"]

log = logging.getLogger(__name__)

# floats of LSTM activations cached per micro-batch
_CACHE_BUDGET = 40_000_000


class ParameterScale(str, enum.Enum):
    WITHIN_SUBJECT = "WithinSubject"
    CROSS_SUBJECT = "CrossSubject"

    @property
    def width_factor(self):
        return 2 if self is ParameterScale.CROSS_SUBJECT else 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 256
    rng_seed: int = 0
    patience: int = 5
    val_fraction: float = 0.1
    parameter_scale: ParameterScale = ParameterScale.WITHIN_SUBJECT
    grad_clip: float = 5.0
    dropout_rate: float = 0.1
    mlp_hidden: Tuple[int, ...] = (50, 25)
    lstm_hidden: Tuple[int, ...] = (200, 100)
    lstm_dense: int = 25
    frame_len: int = 1
    schedule: str = "cosine"

    def __post_init__(self):
        object.__setattr__(self, "parameter_scale", ParameterScale(self.parameter_scale))
        if self.schedule not in ("cosine", "constant"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")

    def widths(self, base):
        k = self.parameter_scale.width_factor
        return tuple(int(h) * k for h in base)

    def to_dict(self):
        d = asdict(self)
        d["parameter_scale"] = self.parameter_scale.value
        d["mlp_hidden"] = list(self.mlp_hidden)
        d["lstm_hidden"] = list(self.lstm_hidden)
        return d


def step_size(cfg, epoch):
    """Learning rate for 1-based ``epoch``."""
    if cfg.schedule == "constant" or cfg.epochs == 1:
        return cfg.learning_rate
    frac = (epoch - 1) / (cfg.epochs - 1)
    return cfg.learning_rate * (0.1 + 0.9 * 0.5 * (1 + np.cos(np.pi * frac)))


def _xy(ds):
    X, y = ds if isinstance(ds, tuple) else (ds.inputs, ds.targets)
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise EmptyDataset("no training rows")
    if not np.all(np.isfinite(y)):
        raise NonFiniteFeature("targets contain NaN or Inf")
    return X, y


def _mse(model, X, y, chunk=2048):
    total = 0.0
    for s in range(0, len(y), chunk):
        out = model.forward(np.asarray(X[s:s + chunk], dtype=float))[0]
        total += float(np.sum((out - y[s:s + chunk]) ** 2))
    return total / len(y)


def _micro_batch(model, batch_size):
    if isinstance(model, LstmModel):
        per_row = model.n_steps * 12 * sum(model.hidden)
        return max(1, min(batch_size, _CACHE_BUDGET // per_row))
    return batch_size


def fit(model, ds, cfg):
    """Train ``model`` in place and return its loss history."""
    X, y = _xy(ds)
    n = len(y)
    n_val = int(round(cfg.val_fraction * n)) if n >= 20 else 0
    n_tr = n - n_val
    Xtr, ytr = X[:n_tr], y[:n_tr]
    rng = np.random.default_rng(cfg.rng_seed)
    opt = Adam(model.params, lr=cfg.learning_rate)
    micro = _micro_batch(model, cfg.batch_size)

    initial = _mse(model, Xtr, ytr)
    if not np.isfinite(initial):
        raise NonFiniteFeature("initial loss is not finite; check the inputs")
    best_val = _mse(model, X[n_tr:], y[n_tr:]) if n_val else initial
    best = {k: v.copy() for k, v in model.params.items()}
    history = {"initial_train_mse": initial, "epoch_loss": [], "val_mse": [],
               "best_epoch": 0}
    stale = 0
    for epoch in range(1, cfg.epochs + 1):
        opt.lr = step_size(cfg, epoch)
        order = rng.permutation(n_tr)
        running = 0.0
        for s in range(0, n_tr, cfg.batch_size):
            rows = np.sort(order[s:s + cfg.batch_size])
            B = rows.size
            grads = None
            for m in range(0, B, micro):
                part = rows[m:m + micro]
                xb = np.asarray(Xtr[part], dtype=float)
                out, cache = model.forward(xb, rng=rng)
                err = out - ytr[part]
                running += float(err @ err)
                g = model.backward(cache, 2.0 * err / B)
                grads = g if grads is None else {k: grads[k] + g[k] for k in g}
            opt.step(model.params, clip_global_norm(grads, cfg.grad_clip))
        epoch_loss = running / n_tr
        if not np.isfinite(epoch_loss):
            raise DivergedTraining(f"loss became {epoch_loss} in epoch {epoch}")
        history["epoch_loss"].append(epoch_loss)
        val = _mse(model, X[n_tr:], y[n_tr:]) if n_val else epoch_loss
        history["val_mse"].append(val)
        log.debug("epoch %d loss %.5g val %.5g", epoch, epoch_loss, val)
        if val < best_val:
            best_val, stale = val, 0
            best = {k: v.copy() for k, v in model.params.items()}
            history["best_epoch"] = epoch
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.params = best
    history["final_train_mse"] = _mse(model, Xtr, ytr)
    return history


def _attach(model, ds, cfg, history):
    model.meta["train_config"] = cfg.to_dict()
    model.meta["history"] = history
    return model


def train_mlp(ds, cfg=TrainConfig()):
    """Fit an MlpModel; widths double under ``CrossSubject`` scaling."""
    X, _ = _xy(ds)
    model = MlpModel(X.shape[1], cfg.widths(cfg.mlp_hidden), cfg.dropout_rate,
                     seed=cfg.rng_seed)
    return _attach(model, ds, cfg, fit(model, ds, cfg))


def train_lstm(ds, cfg=TrainConfig()):
    """Fit an LstmModel; recurrent and dense widths double under ``CrossSubject``."""
    X, _ = _xy(ds)
    model = LstmModel(X.shape[1], cfg.widths(cfg.lstm_hidden),
                      cfg.widths((cfg.lstm_dense,))[0], cfg.frame_len,
                      cfg.dropout_rate, seed=cfg.rng_seed)
    return _attach(model, ds, cfg, fit(model, ds, cfg))
