"""
Dynamic linear model fitted by LASSO.

Objective, in standardized feature units::

    0.5 * mean((y - b - Z w) ** 2) + lam * sum(|w|)

solved by cyclic coordinate descent with soft-thresholding on the Gram
matrix. Weights are mapped back to raw input units before being stored, so
``predict`` is a plain dot product.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyDataset, LengthMismatch, NonFiniteFeature

_CHUNK = 8192

__all__ = ["LinearLassoModel", "soft_threshold", "lasso_objective",
           "coordinate_descent", "train_lasso"]


def soft_threshold(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def lasso_objective(X, y, w, b, lam):
    r = y - b - X @ w
    return 0.5 * np.mean(r * r) + lam * np.sum(np.abs(w))


def coordinate_descent(gram, corr, lam, tol=1e-8, max_iter=10000, w0=None,
                       history=None):
    """Minimize ``0.5 w'Gw - c'w + lam |w|_1`` one coordinate at a time.

    Parameters
    ----------
    gram : (p, p) array
        ``Z'Z / n`` for centered, standardized features ``Z``.
    corr : (p,) array
        ``Z'y / n`` for the centered target.
    lam : float
    tol : float
        Stop when the largest coordinate change of a sweep is below ``tol``.
    max_iter : int
        Maximum number of sweeps.
    history : list, optional
        Receives the smooth-plus-penalty objective (up to the constant
        ``0.5 mean(y^2)``) after every sweep.

    Returns
    -------
    w : array
    n_sweeps : int
    """
    p = corr.size
    w = np.zeros(p) if w0 is None else np.array(w0, dtype=float)
    grad = corr - gram @ w  # c - G w, kept current after every update
    diag = np.diag(gram).copy()
    active = diag > 0
    sweeps = 0
    cols = [gram[:, j].copy() for j in range(p)]
    order = [j for j in range(p) if active[j]]
    for sweeps in range(1, max_iter + 1):
        max_step = 0.0
        for j in order:
            old = w[j]
            z = grad[j] + diag[j] * old
            if z > lam:
                new = (z - lam) / diag[j]
            elif z < -lam:
                new = (z + lam) / diag[j]
            else:
                new = 0.0
            if new != old:
                delta = new - old
                w[j] = new
                grad -= cols[j] * delta
                max_step = max(max_step, abs(delta))
        if history is not None:
            history.append(0.5 * w @ gram @ w - corr @ w + lam * np.abs(w).sum())
        if max_step < tol:
            break
    return w, sweeps


@dataclass
class LinearLassoModel:
    weights: np.ndarray
    bias: float
    lam: float
    input_len: int = None
    meta: dict = field(default_factory=dict)

    kind = "lasso"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.input_len is None:
            self.input_len = self.weights.size

    def predict_batch(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.input_len:
            raise LengthMismatch(f"window of {X.shape[-1]} samples, model expects "
                                 f"{self.input_len}")
        return X @ self.weights + self.bias

    def params(self):
        return {"weights": self.weights, "bias": np.array([self.bias])}

    @property
    def sparsity(self):
        return int(np.sum(self.weights == 0))


def train_lasso(ds, lam, tol=1e-8, max_iter=10000, history=None):
    """Fit a LinearLassoModel to a WindowedDataset (or an ``(X, y)`` pair).

    Features are standardized with their training statistics; ``lam`` acts
    on the standardized weights. Constant features get a zero weight.
    """
    X, y = (ds if isinstance(ds, tuple) else (ds.inputs, ds.targets))
    if not hasattr(X, "shape"):
        X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.shape[0] == 0:
        raise EmptyDataset("no training rows")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    n, p = X.shape
    # chunked so that strided or lazy window views are never materialized whole
    chunks = [slice(s, s + _CHUNK) for s in range(0, n, _CHUNK)]
    mu = np.zeros(p)
    for c in chunks:
        block = np.asarray(X[c], dtype=float)
        if not np.all(np.isfinite(block)):
            raise NonFiniteFeature("dataset contains NaN or Inf")
        mu += block.sum(axis=0)
    if not np.all(np.isfinite(y)):
        raise NonFiniteFeature("dataset contains NaN or Inf")
    mu /= n
    var = sum(((np.asarray(X[c], dtype=float) - mu) ** 2).sum(axis=0)
              for c in chunks) / n
    sd = np.sqrt(var)
    live = sd > 0
    scale = np.where(live, sd, 1.0)
    y_mean = y.mean()
    gram = np.zeros((p, p))
    corr = np.zeros(p)
    for c in chunks:
        Z = (np.asarray(X[c], dtype=float) - mu) / scale
        gram += Z.T @ Z
        corr += Z.T @ (y[c] - y_mean)
    gram /= n
    corr /= n
    gram[~live, :] = 0.0
    gram[:, ~live] = 0.0
    corr[~live] = 0.0
    w_std, sweeps = coordinate_descent(gram, corr, lam, tol, max_iter,
                                       history=history)
    w = np.where(live, w_std / scale, 0.0)
    bias = float(y_mean - mu @ w)
    return LinearLassoModel(w, bias, lam, X.shape[1],
                            {"sweeps": int(sweeps)})
