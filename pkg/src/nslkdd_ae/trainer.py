"""Mini-batch Adam training of the autoencoder on normal traffic only."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .autoencoder import Architecture, ModelParams, init_params, loss_and_gradients, reconstruction_errors
from .dataset import EncodedDataset, EncodedSample, TrafficClass
from .errors import DataError, NumericError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 100
    validation_fraction: float = 0.1
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def fresh(cls, params: ModelParams) -> "AdamState":
        return cls(np.zeros_like(params.flat), np.zeros_like(params.flat), 0)

    def to_dict(self) -> dict:
        return {"t": self.t, "m": self.m.tolist(), "v": self.v.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "AdamState":
        return cls(np.asarray(doc["m"], dtype=np.float64),
                   np.asarray(doc["v"], dtype=np.float64), int(doc["t"]))


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState,
              cfg: TrainConfig) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state."""
    if grads.flat.shape != params.flat.shape or state.m.shape != params.flat.shape:
        raise ValueError("params, gradients and optimiser state are not shape-congruent")
    t = state.t + 1
    g = grads.flat
    m = cfg.adam_beta1 * state.m + (1.0 - cfg.adam_beta1) * g
    v = cfg.adam_beta2 * state.v + (1.0 - cfg.adam_beta2) * (g * g)
    m_hat = m / (1.0 - cfg.adam_beta1 ** t)
    v_hat = v / (1.0 - cfg.adam_beta2 ** t)
    flat = params.flat - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)
    return ModelParams(params.arch, flat, params.seed), AdamState(m, v, t)


@dataclass
class LossHistory:
    train_loss: list[float] = field(default_factory=list)
    validation_loss: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)

    def append(self, train_loss: float, validation_loss: float) -> None:
        self.train_loss.append(train_loss)
        self.validation_loss.append(validation_loss)

    def rows(self):
        for k, (tr, va) in enumerate(zip(self.train_loss, self.validation_loss), start=1):
            yield k, tr, va

    def to_dict(self) -> dict:
        return {"train_loss": list(self.train_loss), "validation_loss": list(self.validation_loss)}

    @classmethod
    def from_dict(cls, doc: dict) -> "LossHistory":
        return cls(list(doc["train_loss"]), list(doc["validation_loss"]))

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "train_loss", "validation_loss"])
            for k, tr, va in self.rows():
                writer.writerow([k, repr(tr), repr(va)])


@dataclass
class TrainResult:
    params: ModelParams
    history: LossHistory
    adam: AdamState
    train_index: np.ndarray
    validation_index: np.ndarray


def split_validation(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Hold out ``round(fraction * n)`` (at least one) samples, chosen once from ``seed``."""
    n_val = min(max(1, int(round(fraction * n))), n - 1)
    order = np.random.default_rng([seed, 0x5EED]).permutation(n)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def epoch_order(train_index: np.ndarray, seed: int, epoch: int) -> np.ndarray:
    # ordering depends only on (seed, epoch)
    return train_index[np.random.default_rng([seed, epoch]).permutation(train_index.size)]


def _as_dataset(samples) -> EncodedDataset:
    if isinstance(samples, EncodedDataset):
        return samples
    return EncodedDataset.from_samples(samples)


def fit(samples: EncodedDataset | Sequence[EncodedSample], cfg: TrainConfig,
        arch: Architecture | None = None,
        on_batch: Callable[[int, np.ndarray], None] | None = None) -> TrainResult:
    """Train from a fresh initialisation and keep every by-product.

    ``on_batch(epoch, indices)`` is called with the dataset row indices of
    every mini-batch that contributes a gradient.
    """
    data = _as_dataset(samples)
    if np.any(data.classes != TrafficClass.NORMAL):
        raise DataError("training data must contain Normal traffic only")
    if len(data) < 2 * cfg.batch_size:
        raise DataError(f"need at least {2 * cfg.batch_size} samples, got {len(data)}")
    arch = arch or Architecture(input_dim=data.dim)
    if arch.input_dim != data.dim:
        raise DataError(f"model expects {arch.input_dim} features, data has {data.dim}")

    x = data.features
    train_idx, val_idx = split_validation(len(data), cfg.validation_fraction, cfg.seed)
    params = init_params(cfg.seed, arch)
    state = AdamState.fresh(params)
    history = LossHistory()
    for epoch in range(1, cfg.epochs + 1):
        order = epoch_order(train_idx, cfg.seed, epoch)
        total = 0.0
        for start in range(0, order.size, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            if on_batch is not None:
                on_batch(epoch, batch)
            loss, grads = loss_and_gradients(x[batch], params)
            if not math.isfinite(loss):
                raise NumericError(f"loss became non-finite at epoch {epoch}")
            params, state = adam_step(params, grads, state, cfg)
            total += loss * batch.size
        train_loss = total / order.size
        val_loss = float(np.mean(reconstruction_errors(x[val_idx], params)))
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise NumericError(f"loss became non-finite at epoch {epoch}")
        history.append(train_loss, val_loss)
        log.info("epoch %d/%d train %.6g validation %.6g", epoch, cfg.epochs, train_loss, val_loss)
    return TrainResult(params, history, state, train_idx, val_idx)


def train(normal_samples, cfg: TrainConfig, arch: Architecture | None = None) -> tuple[ModelParams, LossHistory]:
    result = fit(normal_samples, cfg, arch)
    return result.params, result.history


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def checkpoint_document(params: ModelParams, history: LossHistory | None = None,
                        adam: AdamState | None = None, schema_checksum: str | None = None,
                        config: TrainConfig | None = None) -> dict:
    doc = params.to_dict(schema_checksum)
    if history is not None:
        doc["loss_history"] = history.to_dict()
    if adam is not None:
        doc["adam"] = adam.to_dict()
    if config is not None:
        doc["train_config"] = config.to_dict()
    return doc


def save_checkpoint(path: str | Path, params: ModelParams, **kwargs) -> None:
    doc = checkpoint_document(params, **kwargs)
    atomic_write_text(path, json.dumps(doc, sort_keys=True) + "\n")
