"""Activations, initializers and the Adam optimizer shared by the networks."""

import numpy as np

CLIP_CEILING = 10.0
LEAKY_SLOPE = 0.01


def clipped_relu(x, ceiling=CLIP_CEILING):
    return np.clip(x, 0.0, ceiling)


def clipped_relu_grad(x, ceiling=CLIP_CEILING):
    return ((x > 0) & (x < ceiling)).astype(x.dtype)


def leaky_relu(x, slope=LEAKY_SLOPE):
    return np.where(x > 0, x, slope * x)


def leaky_relu_grad(x, slope=LEAKY_SLOPE):
    return np.where(x > 0, 1.0, slope)


def sigmoid(x):
    # split by sign to avoid overflow in exp
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_in, fan_out))


def orthogonal(rng, n, m):
    a = rng.standard_normal((max(n, m), min(n, m)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q if n >= m else q.T


def dropout_mask(rng, shape, rate):
    """Inverted dropout: kept units are scaled by 1 / (1 - rate)."""
    if rate <= 0:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr = np.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for k in params:
            g = grads[k]
            self.m[k] *= b1
            self.m[k] += (1 - b1) * g
            self.v[k] *= b2
            self.v[k] += (1 - b2) * g * g
            params[k] -= self.lr * corr * self.m[k] / (np.sqrt(self.v[k]) + self.eps)


def clip_global_norm(grads, max_norm):
    if not max_norm:
        return grads
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        grads = {k: g * scale for k, g in grads.items()}
    return grads
