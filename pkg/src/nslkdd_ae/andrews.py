"""Andrews-curve samples of encoded records.

A vector ``x`` becomes the finite Fourier series::

    f(t) = x1/sqrt(2) + x2 sin t + x3 cos t + x4 sin 2t + x5 cos 2t + ...

evaluated on ``t`` in ``[-pi, pi]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import EncodedDataset, TrafficClass


@dataclass(frozen=True)
class AndrewsSample:
    sample: int
    t: float
    value: float
    cls: TrafficClass


def andrews_basis(dim: int, t: np.ndarray) -> np.ndarray:
    """(dim, len(t)) matrix whose row j is the j-th series term."""
    basis = np.empty((dim, t.size))
    basis[0] = 1.0 / np.sqrt(2.0)
    for j in range(1, dim):
        k = (j + 1) // 2
        basis[j] = np.sin(k * t) if j % 2 else np.cos(k * t)
    return basis


def andrews_curves(x: np.ndarray, resolution: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the series for each row of ``x``; returns ``(t, values)``."""
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = np.linspace(-np.pi, np.pi, resolution)
    return t, x @ andrews_basis(x.shape[1], t)


def andrews_samples(data: EncodedDataset, resolution: int = 100, max_rows: int = 200,
                    seed: int = 0) -> list[AndrewsSample]:
    """Curves for a seeded subsample of at most ``max_rows`` records."""
    n = len(data)
    rows = np.arange(n)
    if n > max_rows:
        rows = np.sort(np.random.default_rng(seed).choice(n, size=max_rows, replace=False))
    t, values = andrews_curves(data.features[rows], resolution)
    out = []
    for r, curve in zip(rows, values):
        cls = TrafficClass(int(data.classes[r]))
        out.extend(AndrewsSample(int(r), float(tk), float(v), cls) for tk, v in zip(t, curve))
    return out


def write_andrews_csv(path: str | Path, samples: list[AndrewsSample]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_index", "t", "value", "class"])
        for s in samples:
            writer.writerow([s.sample, repr(s.t), repr(s.value), s.cls.key])
