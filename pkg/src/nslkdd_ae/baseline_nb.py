"""Hybrid Naive Bayes baseline: Gaussian on numeric columns, Bernoulli on one-hot columns.

Class 0 is Normal, class 1 is Attack.  Estimates come from exactly summed
sufficient statistics (``math.fsum``), so they depend on the multiset of
training rows only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import N_NUMERIC, EncodedDataset, EncodedSample
from .detector import Verdict
from .errors import DataError, ShapeError

NB_FORMAT = "nslkdd-ae/naive-bayes"
VARIANCE_FLOOR = 1e-9


@dataclass
class NaiveBayesModel:
    priors: np.ndarray       # (2,)
    means: np.ndarray        # (2, n_numeric)
    variances: np.ndarray    # (2, n_numeric)
    rates: np.ndarray        # (2, n_binary)
    variance_floor: float = VARIANCE_FLOOR

    @property
    def n_numeric(self) -> int:
        return self.means.shape[1]

    @property
    def dim(self) -> int:
        return self.means.shape[1] + self.rates.shape[1]

    def log_joint(self, x: np.ndarray) -> np.ndarray:
        """(N, 2) log prior + log likelihood for each row of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.dim:
            raise ShapeError(f"model expects {self.dim} features, got {x.shape[1]}")
        num, binary = x[:, :self.n_numeric], x[:, self.n_numeric:]
        out = np.empty((x.shape[0], 2))
        log_rate, log_not = np.log(self.rates), np.log1p(-self.rates)
        for k in range(2):
            var = self.variances[k]
            gauss = -0.5 * (np.log(2 * np.pi * var) + (num - self.means[k]) ** 2 / var)
            bern = binary @ log_rate[k] + (1.0 - binary) @ log_not[k]
            out[:, k] = math.log(self.priors[k]) + gauss.sum(axis=1) + bern
        return out

    def predict_attack(self, x: np.ndarray) -> np.ndarray:
        lj = self.log_joint(x)
        return lj[:, 1] > lj[:, 0]

    def to_dict(self) -> dict:
        return {"format": NB_FORMAT, "version": 1, "n_numeric": self.n_numeric,
                "priors": self.priors.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist(), "rates": self.rates.tolist(),
                "variance_floor": self.variance_floor}

    @classmethod
    def from_dict(cls, doc: dict) -> "NaiveBayesModel":
        if doc.get("format") != NB_FORMAT:
            raise DataError("not a naive Bayes model document")
        return cls(np.asarray(doc["priors"]), np.asarray(doc["means"]),
                   np.asarray(doc["variances"]), np.asarray(doc["rates"]),
                   float(doc["variance_floor"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "NaiveBayesModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def nb_train(samples, n_numeric: int = N_NUMERIC,
             variance_floor: float = VARIANCE_FLOOR) -> NaiveBayesModel:
    data = samples if isinstance(samples, EncodedDataset) else EncodedDataset.from_samples(samples)
    y = data.is_attack
    if y.all() or not y.any():
        raise DataError("naive Bayes needs both Normal and Attack samples")
    n = len(data)
    priors, means, variances, rates = [], [], [], []
    for k, mask in enumerate((~y, y)):
        part = data.features[mask]
        count = part.shape[0]
        priors.append(count / n)
        mu = np.array([math.fsum(col) / count for col in part[:, :n_numeric].T])
        var = np.array([math.fsum((col - m) ** 2) / count
                        for col, m in zip(part[:, :n_numeric].T, mu)])
        means.append(mu)
        variances.append(np.maximum(var, variance_floor))
        ones = part[:, n_numeric:].sum(axis=0)
        rates.append((ones + 1.0) / (count + 2.0))
    return NaiveBayesModel(np.array(priors), np.array(means), np.array(variances),
                           np.array(rates), variance_floor)


def nb_predict(model: NaiveBayesModel, sample: EncodedSample | np.ndarray) -> Verdict:
    x = sample.features if isinstance(sample, EncodedSample) else np.asarray(sample)
    if x.ndim != 1:
        raise ShapeError("nb_predict takes a single sample; use predict_attack for batches")
    return Verdict.ATTACK if model.predict_attack(x)[0] else Verdict.NORMAL
