"""PNG figures written next to the CSV dumps.

Uses the non-interactive Agg backend; PNG metadata is pinned so reruns
produce identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .dataset import TrafficClass  # noqa: E402

CLASS_COLORS = {
    TrafficClass.NORMAL: "tab:green",
    TrafficClass.DOS: "tab:red",
    TrafficClass.PROBE: "tab:orange",
    TrafficClass.R2L: "tab:purple",
    TrafficClass.U2R: "tab:brown",
}

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 10,
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_loss(history, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        epochs = np.arange(1, len(history) + 1)
        ax.plot(epochs, history.train_loss, label="training")
        ax.plot(epochs, history.validation_loss, label="validation")
        ax.set_xlabel("epoch")
        ax.set_ylabel("reconstruction loss (MSE)")
        ax.set_yscale("log")
        ax.legend()
        return _save(fig, path)


def plot_error_distribution(errors, classes, threshold, path):
    """Violin plot of log10 reconstruction error per traffic class."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        present = [c for c in TrafficClass if np.any(classes == c)]
        floor = max(float(np.min(errors[errors > 0])) if np.any(errors > 0) else 1e-12, 1e-12)
        data = [np.log10(np.maximum(errors[classes == c], floor)) for c in present]
        parts = ax.violinplot(data, showmedians=True)
        for body, c in zip(parts["bodies"], present):
            body.set_facecolor(CLASS_COLORS[c])
            body.set_alpha(0.6)
        ax.axhline(np.log10(max(threshold, floor)), color="red", lw=1, label=f"threshold {threshold:.3g}")
        ax.set_xticks(range(1, len(present) + 1), [c.display for c in present])
        ax.set_ylabel("log10 reconstruction error")
        ax.legend()
        return _save(fig, path)


def plot_sweep(grid, table, threshold, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for c in TrafficClass:
            if not np.all(np.isnan(table[:, c])):
                ax.plot(grid, 100 * table[:, c], color=CLASS_COLORS[c], label=c.display)
        ax.axvline(threshold, color="gray", ls="--", lw=1)
        ax.set_xscale("log")
        ax.set_xlabel("threshold")
        ax.set_ylabel("detection rate (%)")
        ax.legend()
        return _save(fig, path)


def plot_roc(curve, area, path):
    with plt.rc_context(STYLE | {"figure.figsize": (4.8, 4.8)}):
        fig, ax = plt.subplots()
        ax.plot(curve.fpr, curve.tpr, label=f"AUC = {area:.3f}")
        ax.plot([0, 1], [0, 1], color="gray", ls=":", lw=1)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.01)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.legend(loc="lower right")
        return _save(fig, path)


def plot_confusion(cm, path, title="LSTM autoencoder"):
    """Row-normalised 2x2 matrix (rows: actual, columns: predicted)."""
    counts = np.array([[cm.tn, cm.fp], [cm.fn, cm.tp]], dtype=float)
    rows = counts.sum(axis=1, keepdims=True)
    rates = np.divide(counts, rows, out=np.zeros_like(counts), where=rows > 0)
    with plt.rc_context(STYLE | {"figure.figsize": (4.0, 3.6), "axes.grid": False}):
        fig, ax = plt.subplots()
        ax.imshow(rates, vmin=0, vmax=1, cmap="Blues")
        for i in range(2):
            for j in range(2):
                ax.text(j, i, f"{rates[i, j]:.2f}\n({int(counts[i, j])})", ha="center", va="center",
                        color="white" if rates[i, j] > 0.5 else "black")
        ax.set_xticks([0, 1], ["normal", "attack"])
        ax.set_yticks([0, 1], ["normal", "attack"])
        ax.set_xlabel("predicted")
        ax.set_ylabel("actual")
        ax.set_title(title)
        return _save(fig, path)


def plot_andrews(samples, path):
    by_curve: dict[int, list] = {}
    for s in samples:
        by_curve.setdefault(s.sample, []).append(s)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        seen = set()
        for curve in by_curve.values():
            cls = curve[0].cls
            group = "normal" if cls is TrafficClass.NORMAL else "attack"
            ax.plot([s.t for s in curve], [s.value for s in curve], lw=0.5, alpha=0.5,
                    color="tab:green" if group == "normal" else "tab:red",
                    label=None if group in seen else group)
            seen.add(group)
        ax.set_xlim(-np.pi, np.pi)
        ax.set_xlabel("t")
        ax.set_ylabel("f(t)")
        ax.legend()
        return _save(fig, path)
