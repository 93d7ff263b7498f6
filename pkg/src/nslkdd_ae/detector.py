"""Reconstruction-error scoring and threshold selection.

Counting rule shared by every function here: a record is called Attack
when its error is strictly greater than the threshold, Normal otherwise.
A class's detection rate is the fraction of its records landing on the
correct side.  Classes with no records get ``nan``.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .autoencoder import ModelParams, reconstruction_errors
from .dataset import ATTACK_CLASSES, EncodedDataset, EncodedSample, TrafficClass
from .errors import DataError, ShapeError


class Verdict(enum.Enum):
    NORMAL = "normal"
    ATTACK = "attack"


@dataclass(frozen=True)
class ErrorRecord:
    error: float
    cls: TrafficClass


def errors_from_records(records: Iterable[ErrorRecord]) -> tuple[np.ndarray, np.ndarray]:
    records = list(records)
    return (np.array([r.error for r in records], dtype=np.float64),
            np.array([int(r.cls) for r in records], dtype=np.int64))


def reconstruction_error(model: ModelParams, sample: EncodedSample | np.ndarray) -> float:
    x = sample.features if isinstance(sample, EncodedSample) else np.asarray(sample)
    if x.shape != (model.arch.input_dim,):
        raise ShapeError(f"model expects {model.arch.input_dim} features, sample has {x.shape}")
    return float(reconstruction_errors(x[None, :], model)[0])


def score_dataset(model: ModelParams, data: EncodedDataset) -> np.ndarray:
    if data.dim != model.arch.input_dim:
        raise ShapeError(f"model expects {model.arch.input_dim} features, data has {data.dim}")
    return reconstruction_errors(data.features, model)


def classify(error: float, threshold: float) -> Verdict:
    return Verdict.ATTACK if error > threshold else Verdict.NORMAL


def _check(errors, classes) -> tuple[np.ndarray, np.ndarray]:
    errors = np.asarray(errors, dtype=np.float64)
    classes = np.asarray(classes, dtype=np.int64)
    if errors.ndim != 1 or errors.shape != classes.shape:
        raise ShapeError("errors and classes must be equal-length vectors")
    if errors.size == 0:
        raise DataError("no error records")
    if np.any(~np.isfinite(errors)) or np.any(errors < 0):
        raise DataError("errors must be finite and non-negative")
    return errors, classes


def _rate_table(errors: np.ndarray, classes: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """(len(thresholds), 5) matrix of per-class detection rates."""
    table = np.full((thresholds.size, len(TrafficClass)), np.nan)
    for c in TrafficClass:
        e = np.sort(errors[classes == c])
        if e.size == 0:
            continue
        at_or_below = np.searchsorted(e, thresholds, side="right")
        hits = at_or_below if c is TrafficClass.NORMAL else e.size - at_or_below
        table[:, c] = hits / e.size
    return table


def detection_rates(errors, classes, threshold: float) -> dict[TrafficClass, float]:
    errors, classes = _check(errors, classes)
    row = _rate_table(errors, classes, np.array([float(threshold)]))[0]
    return {c: float(row[c]) for c in TrafficClass}


@dataclass
class ThresholdReport:
    threshold: float
    rates: dict[TrafficClass, float]
    grid: np.ndarray
    table: np.ndarray

    @property
    def sweep(self) -> list[tuple[float, dict[TrafficClass, float]]]:
        return [(float(t), {c: float(row[c]) for c in TrafficClass})
                for t, row in zip(self.grid, self.table)]

    def write_csv(self, path: str | Path) -> None:
        write_sweep_csv(path, self.grid, self.table)


SWEEP_COLUMNS = ["threshold"] + [f"rate_{c.key}" for c in TrafficClass]


def write_sweep_csv(path: str | Path, grid: np.ndarray, table: np.ndarray) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for t, row in zip(grid, table):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def read_sweep_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != SWEEP_COLUMNS:
        raise DataError(f"{path}: unexpected sweep columns {rows[0]}")
    values = np.array([[float(v) for v in row] for row in rows[1:]])
    return values[:, 0], values[:, 1:]


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64).ravel()
    if grid.size == 0:
        raise ValueError("threshold grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("threshold grid must be strictly increasing")
    return grid


def default_grid(errors, points: int = 512) -> np.ndarray:
    """Log-spaced thresholds from the 1st percentile to the maximum error."""
    errors = np.asarray(errors, dtype=np.float64)
    if points < 1:
        raise ValueError("grid needs at least one point")
    hi = float(errors.max())
    lo = float(np.percentile(errors, 1))
    if lo <= 0:
        positive = errors[errors > 0]
        lo = float(positive.min()) if positive.size else hi
    if points == 1 or lo >= hi:
        return np.array([hi])
    grid = np.geomspace(lo, hi, points)
    grid[0], grid[-1] = lo, hi
    return np.unique(grid)


def sweep_thresholds(errors, classes, grid: Sequence[float],
                     threshold: float | None = None, objective: str = "balanced") -> ThresholdReport:
    """Per-class detection rates at every grid threshold.

    The report's operating point is ``threshold`` when given, otherwise the
    grid point chosen by :func:`select_threshold` with ``objective``.
    """
    errors, classes = _check(errors, classes)
    grid = _check_grid(grid)
    table = _rate_table(errors, classes, grid)
    if threshold is None:
        threshold = select_threshold(errors, classes, grid, objective)
    return ThresholdReport(float(threshold), detection_rates(errors, classes, threshold),
                           grid, table)


def _objective_balanced(table: np.ndarray) -> np.ndarray:
    attacks = table[:, [int(c) for c in ATTACK_CLASSES]]
    present = ~np.all(np.isnan(attacks), axis=0)
    normal = table[:, TrafficClass.NORMAL]
    if not present.any():
        return normal
    attack_mean = attacks[:, present].mean(axis=1)
    if np.all(np.isnan(normal)):
        return attack_mean
    return 0.5 * (normal + attack_mean)


def _binary_counts(errors, classes, grid):
    attack = classes != TrafficClass.NORMAL
    e_att = np.sort(errors[attack])
    e_norm = np.sort(errors[~attack])
    tp = e_att.size - np.searchsorted(e_att, grid, side="right")
    fp = e_norm.size - np.searchsorted(e_norm, grid, side="right")
    return tp, fp, e_att.size, e_norm.size


def _objective_youden(errors, classes, grid):
    tp, fp, n_att, n_norm = _binary_counts(errors, classes, grid)
    tpr = tp / n_att if n_att else np.zeros(grid.size)
    tnr = 1.0 - fp / n_norm if n_norm else np.zeros(grid.size)
    return tpr + tnr - 1.0


def _objective_accuracy(errors, classes, grid):
    tp, fp, n_att, n_norm = _binary_counts(errors, classes, grid)
    return (tp + (n_norm - fp)) / (n_att + n_norm)


OBJECTIVES = ("balanced", "youden", "accuracy")


def select_threshold(errors, classes, grid: Sequence[float], objective: str = "balanced") -> float:
    """Grid threshold maximising ``objective``; the smallest one wins ties.

    ``balanced`` averages the Normal rate with the mean rate of the attack
    classes that are present; with no attacks it reduces to the Normal rate.
    Meant to be fed training-split errors only.
    """
    errors, classes = _check(errors, classes)
    grid = _check_grid(grid)
    if objective == "balanced":
        score = _objective_balanced(_rate_table(errors, classes, grid))
    elif objective == "youden":
        score = _objective_youden(errors, classes, grid)
    elif objective == "accuracy":
        score = _objective_accuracy(errors, classes, grid)
    else:
        raise ValueError(f"unknown objective {objective!r}; choose from {OBJECTIVES}")
    return float(grid[int(np.argmax(score))])


def write_errors_csv(path: str | Path, errors: np.ndarray, classes: np.ndarray) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_index", "class", "error"])
        for k, (e, c) in enumerate(zip(errors, classes)):
            writer.writerow([k, TrafficClass(int(c)).key, repr(float(e))])


def read_errors_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    return (np.array([float(r["error"]) for r in rows]),
            np.array([int(TrafficClass.from_key(r["class"])) for r in rows], dtype=np.int64))
