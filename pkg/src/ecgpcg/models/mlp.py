"""Two-layer fully connected regressor with hand-written backpropagation."""

import numpy as np

from ..errors import LengthMismatch
from .layers import (CLIP_CEILING, clipped_relu, clipped_relu_grad, dropout_mask, glorot,
                     leaky_relu, leaky_relu_grad)

__all__ = ["MlpModel"]


class MlpModel:
    """input -> dense(h1) -> clipped ReLU -> dense(h2) -> leaky ReLU
    -> dropout -> dense(1).
    """

    kind = "mlp"
    param_names = ("W1", "b1", "W2", "b2", "W3", "b3")

    def __init__(self, input_len, hidden=(50, 25), dropout_rate=0.1, seed=0,
                 params=None, meta=None):
        self.input_len = int(input_len)
        self.hidden = tuple(int(h) for h in hidden)
        self.dropout_rate = float(dropout_rate)
        self.meta = dict(meta or {})
        if params is None:
            rng = np.random.default_rng(seed)
            h1, h2 = self.hidden
            params = {
                "W1": glorot(rng, self.input_len, h1), "b1": np.zeros(h1),
                "W2": glorot(rng, h1, h2), "b2": np.zeros(h2),
                "W3": glorot(rng, h2, 1), "b3": np.zeros(1),
            }
        self.params = {k: np.asarray(params[k], dtype=float) for k in self.param_names}

    def config(self):
        return {"input_len": self.input_len, "hidden": list(self.hidden),
                "dropout_rate": self.dropout_rate}

    def n_parameters(self):
        return sum(v.size for v in self.params.values())

    def forward(self, X, rng=None):
        """Forward pass; dropout is applied only when ``rng`` is given."""
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.input_len:
            raise LengthMismatch(f"window of {X.shape[-1]} samples, model expects "
                                 f"{self.input_len}")
        p = self.params
        z1 = X @ p["W1"] + p["b1"]
        a1 = clipped_relu(z1)
        z2 = a1 @ p["W2"] + p["b2"]
        a2 = leaky_relu(z2)
        mask = dropout_mask(rng, a2.shape, self.dropout_rate) if rng is not None else None
        d2 = a2 * mask if mask is not None else a2
        out = (d2 @ p["W3"] + p["b3"])[:, 0]
        return out, (X, z1, a1, z2, mask, d2)

    def backward(self, cache, dout):
        X, z1, a1, z2, mask, d2 = cache
        p = self.params
        dout = dout[:, None]
        g = {"W3": d2.T @ dout, "b3": dout.sum(axis=0)}
        dd2 = dout @ p["W3"].T
        da2 = dd2 * mask if mask is not None else dd2
        dz2 = da2 * leaky_relu_grad(z2)
        g["W2"] = a1.T @ dz2
        g["b2"] = dz2.sum(axis=0)
        dz1 = (dz2 @ p["W2"].T) * clipped_relu_grad(z1)
        g["W1"] = X.T @ dz1
        g["b1"] = dz1.sum(axis=0)
        return g

    def kink_pattern(self, X):
        """Which side of every activation breakpoint each unit sits on."""
        _, (_, z1, _, z2, _, _) = self.forward(X)
        return np.concatenate([(z1 > 0).ravel(), (z1 > CLIP_CEILING).ravel(),
                               (z2 > 0).ravel()])

    def predict_batch(self, X):
        return self.forward(X)[0]
