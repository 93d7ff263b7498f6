"""Stacked LSTM autoencoder with exact reverse-mode gradients.

Every record is a length-1 sequence, so each LSTM layer runs a single cell
step from a zero ``(h, c)`` state and hands its hidden state to the next
layer.  Encoder ``D -> 32 -> 16 -> 8``, decoder ``8 -> 8 -> 16 -> 32``,
then a dense ReLU layer ``32 -> D``.

All trainable values live in one flat float64 buffer inside
:class:`ModelParams`; the per-layer arrays are views into it.  Gradients
use the same container, which makes shape congruence structural and lets
the optimiser update the whole model with a handful of vector operations.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import numeric
from .errors import DataError, ShapeError

GATES = ("input", "forget", "cell", "output")
MODEL_FORMAT = "nslkdd-ae/model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class Architecture:
    input_dim: int = 122
    hidden: tuple[int, ...] = (32, 16, 8)

    def __post_init__(self):
        if self.input_dim < 1 or not self.hidden or min(self.hidden) < 1:
            raise ValueError("dimensions must be positive")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def bottleneck(self) -> int:
        return self.hidden[-1]

    def encoder_dims(self) -> list[tuple[int, int]]:
        dims = (self.input_dim,) + self.hidden
        return list(zip(dims[:-1], dims[1:]))

    def decoder_dims(self) -> list[tuple[int, int]]:
        # mirror of the encoder; the first decoder layer keeps the bottleneck width
        rev = self.hidden[::-1]
        return list(zip((rev[0],) + rev[:-1], rev))

    def layout(self) -> list[tuple[str, tuple[int, ...]]]:
        entries = []
        for part, dims in (("encoder", self.encoder_dims()), ("decoder", self.decoder_dims())):
            for k, (n_in, n_h) in enumerate(dims):
                entries += [(f"{part}.{k}.W", (4 * n_h, n_in)),
                            (f"{part}.{k}.U", (4 * n_h, n_h)),
                            (f"{part}.{k}.b", (4 * n_h,))]
        entries += [("output.W", (self.input_dim, self.hidden[0])),
                    ("output.b", (self.input_dim,))]
        return entries

    @property
    def n_params(self) -> int:
        return sum(math.prod(shape) for _, shape in self.layout())

    def to_dict(self) -> dict:
        return {"input_dim": self.input_dim,
                "encoder_hidden": list(self.hidden),
                "decoder_hidden": [h for _, h in self.decoder_dims()],
                "gate_order": list(GATES),
                "output_activation": "relu"}


@dataclass(frozen=True)
class LstmLayerParams:
    """One layer's weights with the four gates stacked row-wise (i, f, g, o)."""

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.U.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        k = GATES.index(name)
        rows = slice(k * self.hidden_dim, (k + 1) * self.hidden_dim)
        return self.W[rows], self.U[rows], self.b[rows]


@dataclass(frozen=True)
class DenseLayerParams:
    W: np.ndarray
    b: np.ndarray


class ModelParams:
    """Autoencoder parameters (or a gradient) backed by one flat buffer."""

    def __init__(self, arch: Architecture, flat: np.ndarray | None = None, seed: int | None = None):
        self.arch = arch
        self.seed = seed
        n = arch.n_params
        self.flat = np.zeros(n) if flat is None else np.asarray(flat, dtype=np.float64)
        if self.flat.shape != (n,):
            raise ShapeError(f"expected {n} parameters, got {self.flat.shape}")
        self.arrays: dict[str, np.ndarray] = {}
        offset = 0
        for name, shape in arch.layout():
            size = math.prod(shape)
            self.arrays[name] = self.flat[offset:offset + size].reshape(shape)
            offset += size
        self.encoder = [self._lstm("encoder", k) for k in range(len(arch.hidden))]
        self.decoder = [self._lstm("decoder", k) for k in range(len(arch.hidden))]
        self.output = DenseLayerParams(self.arrays["output.W"], self.arrays["output.b"])

    def _lstm(self, part: str, k: int) -> LstmLayerParams:
        a = self.arrays
        return LstmLayerParams(a[f"{part}.{k}.W"], a[f"{part}.{k}.U"], a[f"{part}.{k}.b"])

    @property
    def layers(self) -> list[LstmLayerParams]:
        return self.encoder + self.decoder

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, self.flat.copy(), self.seed)

    def zeros_like(self) -> "ModelParams":
        return ModelParams(self.arch, np.zeros_like(self.flat), self.seed)

    def __eq__(self, other) -> bool:
        return (isinstance(other, ModelParams) and self.arch == other.arch
                and np.array_equal(self.flat, other.flat))

    def __repr__(self) -> str:
        return f"ModelParams({self.arch}, n={self.flat.size}, seed={self.seed})"

    # -- serialisation -------------------------------------------------

    def to_dict(self, schema_checksum: str | None = None) -> dict:
        layers = {}
        for part, group in (("encoder", self.encoder), ("decoder", self.decoder)):
            for k, layer in enumerate(group):
                layers[f"{part}.{k}"] = {
                    g: {"W": layer.gate(g)[0].ravel().tolist(),
                        "U": layer.gate(g)[1].ravel().tolist(),
                        "b": layer.gate(g)[2].tolist()}
                    for g in GATES
                }
        layers["output"] = {"W": self.output.W.ravel().tolist(), "b": self.output.b.tolist()}
        return {"format": MODEL_FORMAT, "version": MODEL_VERSION,
                "architecture": self.arch.to_dict(), "seed": self.seed,
                "schema_checksum": schema_checksum, "layers": layers}

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelParams":
        if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
            raise DataError(f"not a version-{MODEL_VERSION} model document")
        shape = doc["architecture"]
        arch = Architecture(shape["input_dim"], tuple(shape["encoder_hidden"]))
        if list(shape.get("decoder_hidden", [])) != [h for _, h in arch.decoder_dims()]:
            raise DataError("decoder dimensions do not mirror the encoder")
        params = cls(arch, seed=doc.get("seed"))
        layers = doc["layers"]
        try:
            for part, group in (("encoder", params.encoder), ("decoder", params.decoder)):
                for k, layer in enumerate(group):
                    for g in GATES:
                        w, u, b = layer.gate(g)
                        entry = layers[f"{part}.{k}"][g]
                        w[...] = np.reshape(entry["W"], w.shape)
                        u[...] = np.reshape(entry["U"], u.shape)
                        b[...] = np.reshape(entry["b"], b.shape)
            params.output.W[...] = np.reshape(layers["output"]["W"], params.output.W.shape)
            params.output.b[...] = np.reshape(layers["output"]["b"], params.output.b.shape)
        except (KeyError, ValueError) as exc:
            raise DataError(f"malformed model layers: {exc}") from exc
        numeric.check_finite(params.flat, "model parameter")
        return params


DENSE_BIAS_INIT = 0.5


def init_params(seed: int, arch: Architecture | None = None) -> ModelParams:
    """Uniform(+-1/sqrt(hidden)) gate weights, forget bias 1, other biases 0.

    The dense output layer draws from uniform(+-1/sqrt(fan_in)); its bias
    starts at DENSE_BIAS_INIT, the middle of the [0, 1] target range, so no
    ReLU output begins dead (a dead unit never receives a gradient).
    """
    arch = arch or Architecture()
    rng = np.random.default_rng(seed)
    p = ModelParams(arch, seed=seed)
    for layer in p.layers:
        bound = 1.0 / np.sqrt(layer.hidden_dim)
        layer.W[...] = rng.uniform(-bound, bound, layer.W.shape)
        layer.U[...] = rng.uniform(-bound, bound, layer.U.shape)
        layer.b[...] = 0.0
        layer.gate("forget")[2][...] = 1.0
    bound = 1.0 / np.sqrt(p.output.W.shape[1])
    p.output.W[...] = rng.uniform(-bound, bound, p.output.W.shape)
    p.output.b[...] = DENSE_BIAS_INIT
    return p


def _check_layer(x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, p: LstmLayerParams):
    if x.shape[-1] != p.input_dim:
        raise ShapeError(f"layer expects input width {p.input_dim}, got {x.shape[-1]}")
    if h_prev.shape[-1] != p.hidden_dim or c_prev.shape[-1] != p.hidden_dim:
        raise ShapeError(f"layer expects state width {p.hidden_dim}")


def _cell_step(x, h_prev, c_prev, p: LstmLayerParams):
    n = p.hidden_dim
    pre = numeric.linear(x, p.W, p.b) + h_prev @ p.U.T
    i = numeric.sigmoid(pre[..., :n])
    f = numeric.sigmoid(pre[..., n:2 * n])
    g = np.tanh(pre[..., 2 * n:3 * n])
    o = numeric.sigmoid(pre[..., 3 * n:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, (x, h_prev, c_prev, pre, i, f, g, o, tc)


def lstm_cell(x, h_prev, c_prev, p: LstmLayerParams) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM step; ``x`` may be a vector or a batch of row vectors."""
    x, h_prev, c_prev = (np.asarray(a, dtype=np.float64) for a in (x, h_prev, c_prev))
    _check_layer(x, h_prev, c_prev, p)
    h, c, _ = _cell_step(x, h_prev, c_prev, p)
    return h, c


def _cell_backward(dh, cache, p: LstmLayerParams, grad: LstmLayerParams):
    x, h_prev, c_prev, pre, i, f, g, o, tc = cache
    do = dh * tc
    dc = dh * o * (1.0 - tc * tc)
    dpre = np.concatenate([
        dc * g * i * (1.0 - i),
        dc * c_prev * f * (1.0 - f),
        dc * i * (1.0 - g * g),
        do * o * (1.0 - o),
    ], axis=-1)
    grad.W[...] += dpre.T @ x
    grad.U[...] += dpre.T @ h_prev
    grad.b[...] += dpre.sum(axis=0)
    return dpre @ p.W


@dataclass
class ForwardTrace:
    caches: list[tuple]
    dense_pre: np.ndarray
    dense_in: np.ndarray

    @property
    def hidden_states(self) -> list[np.ndarray]:
        """h of every LSTM layer, recovered as o * tanh(c)."""
        return [cache[7] * cache[8] for cache in self.caches]

    @property
    def cell_states(self) -> list[np.ndarray]:
        return [cache[5] * cache[2] + cache[4] * cache[6] for cache in self.caches]


def _forward(x: np.ndarray, params: ModelParams, record_trace: bool):
    caches = []
    h = x
    z = None
    for k, layer in enumerate(params.layers):
        zeros = np.zeros(h.shape[:-1] + (layer.hidden_dim,))
        h, _, cache = _cell_step(h, zeros, zeros, layer)
        if record_trace:
            caches.append(cache)
        if k == len(params.encoder) - 1:
            z = h
    dense_pre = numeric.linear(h, params.output.W, params.output.b)
    x_hat = np.maximum(dense_pre, 0.0)
    trace = ForwardTrace(caches, dense_pre, h) if record_trace else None
    return x_hat, z, trace


def forward(x, params: ModelParams, record_trace: bool = False):
    """Reconstruct ``x`` (a vector or an (N, D) batch).

    Returns ``(x_hat, z, trace)`` where ``z`` is the bottleneck code and
    ``trace`` is ``None`` unless ``record_trace`` is set.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.arch.input_dim or x.ndim not in (1, 2):
        raise ShapeError(f"expected input width {params.arch.input_dim}, got shape {x.shape}")
    if x.ndim == 1:
        x_hat, z, trace = _forward(x[None, :], params, record_trace)
        return x_hat[0], z[0], trace
    return _forward(x, params, record_trace)


def loss_and_gradients(x, params: ModelParams, loss_scale: float = 1.0) -> tuple[float, ModelParams]:
    """Batch loss ``mean_n mse(x_n, x_hat_n)`` and its exact gradient.

    ``x`` is a vector or an (N, D) batch; per-sample losses are averaged
    over samples.  ``loss_scale`` multiplies the loss being differentiated.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.arch.input_dim:
        raise ShapeError(f"expected input width {params.arch.input_dim}, got shape {x.shape}")
    x_hat, _, trace = _forward(x, params, record_trace=True)
    diff = x_hat - x
    loss = float(np.mean(diff * diff)) * loss_scale
    grad = params.zeros_like()

    d_xhat = (2.0 * loss_scale / diff.size) * diff
    d_pre = d_xhat * (trace.dense_pre > 0)
    grad.output.W[...] = d_pre.T @ trace.dense_in
    grad.output.b[...] = d_pre.sum(axis=0)
    dh = d_pre @ params.output.W
    for layer, glayer, cache in zip(params.layers[::-1], grad.layers[::-1], trace.caches[::-1]):
        dh = _cell_backward(dh, cache, layer, glayer)
    return loss, grad


def gradients(x, params: ModelParams) -> ModelParams:
    """Gradient of ``mse(x, forward(x))`` w.r.t. every parameter."""
    return loss_and_gradients(x, params)[1]


def reconstruction_errors(x, params: ModelParams, chunk: int = 8192) -> np.ndarray:
    """Per-sample MSE between rows of ``x`` and their reconstructions."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = np.empty(x.shape[0])
    for start in range(0, x.shape[0], chunk):
        block = x[start:start + chunk]
        x_hat, _, _ = forward(block, params)
        d = x_hat - block
        out[start:start + chunk] = np.mean(d * d, axis=1)
    return out


def model_digest(params: ModelParams) -> str:
    return hashlib.sha256(params.flat.tobytes()).hexdigest()


def load_model(path: str | Path) -> tuple[ModelParams, dict]:
    """Read a model (or checkpoint) file; returns the params and the raw document."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    return ModelParams.from_dict(doc), doc
