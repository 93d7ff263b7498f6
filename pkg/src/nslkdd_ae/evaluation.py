"""Binary detection metrics, ROC/AUC and per-class detection rates.

Attack is the positive class throughout.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .dataset import TrafficClass
from .errors import DataError, ShapeError

# Reference figures for models this package does not implement (percent).
LITERATURE_RESULTS = {
    "svm": {"precision": 80.0, "recall": 75.0, "f_score": 75.0, "accuracy": 75.3},
    "j48": {"precision": 85.0, "recall": 81.0, "f_score": 81.0, "accuracy": 81.5},
    "naive_bayes": {"precision": 80.0, "recall": 76.0, "f_score": 75.0, "accuracy": 76.1},
    "random_forest": {"precision": 85.0, "recall": 80.0, "f_score": 80.0, "accuracy": 80.4},
    "lstm_autoencoder": {"precision": 90.99, "recall": 90.51, "f_score": 90.75, "accuracy": 89.49},
}


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict:
        attack = self.tp + self.fn
        normal = self.tn + self.fp
        return {
            "tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn,
            "attack_row_rate": self.tp / attack if attack else None,
            "normal_row_rate": self.tn / normal if normal else None,
        }


def _as_attack_flags(predictions) -> np.ndarray:
    preds = list(predictions) if not isinstance(predictions, np.ndarray) else predictions
    if isinstance(preds, np.ndarray) and preds.dtype == bool:
        return preds
    return np.array([getattr(p, "value", p) in ("attack", True, 1) for p in preds], dtype=bool)


def confusion(predictions, truth) -> ConfusionMatrix:
    """Tally predictions (``Verdict`` values or booleans, True = Attack) against classes."""
    pred = _as_attack_flags(predictions)
    truth = np.asarray([int(t) for t in truth] if not isinstance(truth, np.ndarray) else truth)
    if pred.shape != truth.shape:
        raise ShapeError(f"{pred.size} predictions vs {truth.size} labels")
    actual = truth != TrafficClass.NORMAL
    return ConfusionMatrix(
        tp=int(np.sum(pred & actual)), tn=int(np.sum(~pred & ~actual)),
        fp=int(np.sum(pred & ~actual)), fn=int(np.sum(~pred & actual)),
    )


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f_score: float
    accuracy: float
    degenerate: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("precision", "recall", "f_score", "accuracy")}
        out["percent"] = {k: round(100 * v, 2) for k, v in out.items()}
        out["degenerate"] = list(self.degenerate)
        return out


def metrics(cm: ConfusionMatrix) -> Metrics:
    """Precision, recall, F-score and accuracy, rounded once from exact rationals.

    A metric whose denominator is zero is reported as 0.0 and named in
    ``degenerate``.
    """
    if cm.total == 0:
        raise DataError("empty confusion matrix")
    degenerate = []
    precision = Fraction(cm.tp, cm.tp + cm.fp) if cm.tp + cm.fp else None
    recall = Fraction(cm.tp, cm.tp + cm.fn) if cm.tp + cm.fn else None
    if precision is None:
        degenerate.append("precision")
    if recall is None:
        degenerate.append("recall")
    p, r = precision or Fraction(0), recall or Fraction(0)
    if p + r:
        f = 2 * p * r / (p + r)
    else:
        f = Fraction(0)
        degenerate.append("f_score")
    accuracy = Fraction(cm.tp + cm.tn, cm.total)
    return Metrics(float(p), float(r), float(f), float(accuracy), tuple(degenerate))


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["fpr", "tpr"])
            for x, y in zip(self.fpr, self.tpr):
                writer.writerow([repr(float(x)), repr(float(y))])


def roc_curve(errors, classes) -> RocCurve:
    """ROC over every distinct error value, from (0, 0) to (1, 1).

    Point k corresponds to the rule ``error > thresholds[k]``; the first
    threshold is ``+inf`` and the rest sit just below each distinct score.
    """
    errors = np.asarray(errors, dtype=np.float64)
    actual = np.asarray(classes) != TrafficClass.NORMAL
    if errors.shape != actual.shape:
        raise ShapeError("errors and classes must have equal length")
    n_pos, n_neg = int(actual.sum()), int((~actual).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both Normal and Attack records")
    order = np.argsort(-errors, kind="stable")
    scores, labels = errors[order], actual[order]
    # last index of each run of equal scores
    ends = np.r_[np.nonzero(np.diff(scores))[0], scores.size - 1]
    tp = np.cumsum(labels)[ends]
    fp = np.cumsum(~labels)[ends]
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    thresholds = np.r_[np.inf, np.nextafter(scores[ends], -np.inf)]
    return RocCurve(fpr, tpr, thresholds)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve."""
    x, y = curve.fpr, curve.tpr
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) * 0.5))


def detection_rates(errors, classes, threshold: float) -> dict[TrafficClass, float]:
    """Fraction of each class on its correct side of ``threshold`` (nan when absent)."""
    errors = np.asarray(errors, dtype=np.float64)
    classes = np.asarray(classes)
    out = {}
    for c in TrafficClass:
        e = errors[classes == c]
        if e.size == 0:
            out[c] = float("nan")
            continue
        correct = e <= threshold if c is TrafficClass.NORMAL else e > threshold
        out[c] = int(np.count_nonzero(correct)) / e.size
    return out


def rates_to_dict(rates: dict[TrafficClass, float]) -> dict[str, float | None]:
    return {c.key: (None if np.isnan(v) else v) for c, v in rates.items()}


def evaluate(errors, classes, threshold: float) -> dict:
    """The evaluation section of a report for one frozen threshold."""
    errors = np.asarray(errors, dtype=np.float64)
    classes = np.asarray(classes)
    cm = confusion(errors > threshold, classes)
    m = metrics(cm)
    rates = detection_rates(errors, classes, threshold)
    section = {
        "threshold": float(threshold),
        "n_samples": int(errors.size),
        "class_counts": {c.key: int(np.sum(classes == c)) for c in TrafficClass},
        "confusion": cm.to_dict(),
        "metrics": m.to_dict(),
        "detection_rates": rates_to_dict(rates),
        "detection_rates_percent": {k: (None if v is None else round(100 * v, 2))
                                    for k, v in rates_to_dict(rates).items()},
    }
    try:
        curve = roc_curve(errors, classes)
    except DataError:
        section["auc"] = None
    else:
        section["auc"] = auc(curve)
    return section
