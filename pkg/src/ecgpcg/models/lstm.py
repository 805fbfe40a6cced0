"""
Two-layer LSTM regressor (sequence to one) with backpropagation through time.

Architecture::

    window -> frames -> LSTM(h1) -> leaky ReLU -> LSTM(h2) -> last state
           -> leaky ReLU -> dropout -> dense(d) -> dense(1)

With ``frame_len == 1`` every input sample is one time step. Larger values
stack consecutive samples into frames (zero-padded at the start) to shorten
the recursion.
"""

import numpy as np

from ..errors import LengthMismatch
from .layers import dropout_mask, glorot, leaky_relu, leaky_relu_grad, orthogonal, sigmoid

__all__ = ["LstmModel"]


def _cell_forward(xproj, Wh):
    T, B, H4 = xproj.shape
    H = H4 // 4
    hs = np.zeros((T + 1, B, H))
    cs = np.zeros((T + 1, B, H))
    gates = np.empty((T, B, H4))
    tcs = np.empty((T, B, H))
    for t in range(T):
        z = xproj[t] + hs[t] @ Wh
        ifo = sigmoid(z[:, np.r_[0:2 * H, 3 * H:4 * H]])
        g = np.tanh(z[:, 2 * H:3 * H])
        i, f, o = ifo[:, :H], ifo[:, H:2 * H], ifo[:, 2 * H:]
        cs[t + 1] = f * cs[t] + i * g
        tcs[t] = np.tanh(cs[t + 1])
        hs[t + 1] = o * tcs[t]
        gates[t, :, :H], gates[t, :, H:2 * H] = i, f
        gates[t, :, 2 * H:3 * H], gates[t, :, 3 * H:] = g, o
    return hs, cs, gates, tcs


def _cell_backward(dh_seq, Wh, hs, cs, gates, tcs, last_only=False):
    """Gradients of the pre-activations given dL/dh_t for every step.

    ``dh_seq`` is (T, B, H), or (B, H) for the last step only when
    ``last_only`` is set.
    """
    T, B, H4 = gates.shape
    H = H4 // 4
    dz = np.empty((T, B, H4))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    WhT = Wh.T
    for t in range(T - 1, -1, -1):
        if last_only:
            dh = dh_next + dh_seq if t == T - 1 else dh_next
        else:
            dh = dh_seq[t] + dh_next
        i, f = gates[t, :, :H], gates[t, :, H:2 * H]
        g, o = gates[t, :, 2 * H:3 * H], gates[t, :, 3 * H:]
        tc = tcs[t]
        dc = dh * o * (1 - tc * tc) + dc_next
        dz[t, :, :H] = dc * g * i * (1 - i)
        dz[t, :, H:2 * H] = dc * cs[t] * f * (1 - f)
        dz[t, :, 2 * H:3 * H] = dc * i * (1 - g * g)
        dz[t, :, 3 * H:] = dh * tc * o * (1 - o)
        dc_next = dc * f
        dh_next = dz[t] @ WhT
    dWh = hs[:-1].reshape(T * B, -1).T @ dz.reshape(T * B, H4)
    return dz, dWh


class LstmModel:
    kind = "lstm"
    param_names = ("Wx1", "Wh1", "b1", "Wx2", "Wh2", "b2", "Wd", "bd", "Wo", "bo")

    def __init__(self, input_len, hidden=(200, 100), dense=25, frame_len=1,
                 dropout_rate=0.1, seed=0, params=None, meta=None):
        self.input_len = int(input_len)
        self.hidden = tuple(int(h) for h in hidden)
        self.dense = int(dense)
        self.frame_len = int(frame_len)
        self.dropout_rate = float(dropout_rate)
        self.meta = dict(meta or {})
        if params is None:
            params = self._init(np.random.default_rng(seed))
        self.params = {k: np.asarray(params[k], dtype=float) for k in self.param_names}

    def _init(self, rng):
        h1, h2 = self.hidden
        F = self.frame_len
        p = {}
        for layer, (fan_in, h) in enumerate([(F, h1), (h1, h2)], 1):
            p[f"Wx{layer}"] = glorot(rng, fan_in, 4 * h)
            p[f"Wh{layer}"] = np.hstack([orthogonal(rng, h, h) for _ in range(4)])
            b = np.zeros(4 * h)
            b[h:2 * h] = 1.0  # forget-gate bias
            p[f"b{layer}"] = b
        p["Wd"] = glorot(rng, h2, self.dense)
        p["bd"] = np.zeros(self.dense)
        p["Wo"] = glorot(rng, self.dense, 1)
        p["bo"] = np.zeros(1)
        return p

    def config(self):
        return {"input_len": self.input_len, "hidden": list(self.hidden),
                "dense": self.dense, "frame_len": self.frame_len,
                "dropout_rate": self.dropout_rate}

    def n_parameters(self):
        return sum(v.size for v in self.params.values())

    @property
    def n_steps(self):
        return -(-self.input_len // self.frame_len)

    def _frames(self, X):
        B = X.shape[0]
        T, F = self.n_steps, self.frame_len
        pad = T * F - self.input_len
        if pad:
            X = np.hstack([np.zeros((B, pad)), X])
        return X.reshape(B, T, F).transpose(1, 0, 2)

    def forward(self, X, rng=None):
        """Forward pass; dropout is applied only when ``rng`` is given."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_len:
            raise LengthMismatch(f"window of {X.shape[-1]} samples, model expects "
                                 f"{self.input_len}")
        p = self.params
        xs = self._frames(X)
        s1 = _cell_forward(xs @ p["Wx1"] + p["b1"], p["Wh1"])
        h1 = s1[0][1:]
        a1 = leaky_relu(h1)
        s2 = _cell_forward(a1 @ p["Wx2"] + p["b2"], p["Wh2"])
        last = s2[0][-1]
        a2 = leaky_relu(last)
        mask = dropout_mask(rng, a2.shape, self.dropout_rate) if rng is not None else None
        d2 = a2 * mask if mask is not None else a2
        u = d2 @ p["Wd"] + p["bd"]
        out = (u @ p["Wo"] + p["bo"])[:, 0]
        return out, (xs, s1, a1, s2, last, mask, d2, u)

    def backward(self, cache, dout):
        xs, s1, a1, s2, last, mask, d2, u = cache
        p = self.params
        T, B, F = xs.shape
        dout = dout[:, None]
        g = {"Wo": u.T @ dout, "bo": dout.sum(axis=0)}
        du = dout @ p["Wo"].T
        g["Wd"] = d2.T @ du
        g["bd"] = du.sum(axis=0)
        dd2 = du @ p["Wd"].T
        da2 = dd2 * mask if mask is not None else dd2
        dlast = da2 * leaky_relu_grad(last)
        dz2, g["Wh2"] = _cell_backward(dlast, p["Wh2"], *s2, last_only=True)
        H1 = a1.shape[-1]
        g["Wx2"] = a1.reshape(T * B, H1).T @ dz2.reshape(T * B, -1)
        g["b2"] = dz2.sum(axis=(0, 1))
        dh1 = (dz2 @ p["Wx2"].T) * leaky_relu_grad(s1[0][1:])
        dz1, g["Wh1"] = _cell_backward(dh1, p["Wh1"], *s1)
        g["Wx1"] = xs.reshape(T * B, F).T @ dz1.reshape(T * B, -1)
        g["b1"] = dz1.sum(axis=(0, 1))
        return g

    def kink_pattern(self, X):
        """Sign of every leaky-ReLU input."""
        _, (_, s1, _, _, last, _, _, _) = self.forward(X)
        return np.concatenate([(s1[0][1:] > 0).ravel(), (last > 0).ravel()])

    def predict_batch(self, X, chunk=1024):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        out = [self.forward(X[s:s + chunk])[0] for s in range(0, X.shape[0], chunk)]
        return np.concatenate(out) if out else np.zeros(0)
