"""Small dense kernels used by the autoencoder.

Vectors and matrices are plain float64 numpy arrays.  ``matvec`` sums
columns left to right so its result does not depend on the BLAS build; the
batched training path uses :func:`linear`, which goes through numpy's GEMM.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError, ShapeError


def as_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {m.shape}")
    return m


def as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"expected a vector, got shape {v.shape}")
    return v


def check_finite(a: np.ndarray, what: str = "value") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NumericError(f"non-finite {what}")
    return a


def matvec(m, v) -> np.ndarray:
    m, v = as_matrix(m), as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ShapeError(f"cannot multiply {m.shape} matrix by length-{v.shape[0]} vector")
    out = np.zeros(m.shape[0])
    for j in range(m.shape[1]):
        out += m[:, j] * v[j]
    return out


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """``x @ w.T + b`` for a vector or a batch of row vectors."""
    if x.shape[-1] != w.shape[1]:
        raise ShapeError(f"input width {x.shape[-1]} does not match weight shape {w.shape}")
    out = x @ w.T
    if b is not None:
        out += b
    return out


def sigmoid(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def tanh(x) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


def relu(x) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


ACTIVATIONS = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}


def elementwise(v, fn: str) -> np.ndarray:
    try:
        return ACTIVATIONS[fn](v)
    except KeyError:
        raise ValueError(f"unknown activation {fn!r}; choose from {sorted(ACTIVATIONS)}") from None


def mse(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(d * d))
