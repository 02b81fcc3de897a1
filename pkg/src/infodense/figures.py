"""Matplotlib renderings of the report data, written next to the CSV/JSON.

Every function takes already-computed report objects and a target path; no
figure computes anything new, so the plots always agree with the delimited
output beside them.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .eigenphase import AngleField
from .metrics import EvalReport
from .mutualinfo import MiField
from .regress import TrainReport

_DPI = 150


def save_field_heatmap(field: AngleField | MiField, path: str | Path, title: str) -> Path:
    """Heatmap of a pairwise information-density field."""
    path = Path(path)
    n = len(field.sensor_ids)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.45 * n + 2.0),) * 2)
    if isinstance(field, AngleField):
        im = ax.imshow(field.matrix, cmap="coolwarm", vmin=0.0, vmax=180.0)
        label = "angle (degrees)"
    else:
        im = ax.imshow(field.matrix, cmap="viridis", vmin=0.0)
        label = "mutual information (nats)"
    ax.set_xticks(range(n), field.sensor_ids, rotation=90, fontsize=7)
    ax.set_yticks(range(n), field.sensor_ids, fontsize=7)
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label=label, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_training_curves(report: TrainReport, path: str | Path, title: str) -> Path:
    """Train/validation MSE per epoch on a log scale."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    epochs = np.arange(1, len(report.train_mse) + 1)
    ax.plot(epochs, report.train_mse, label="train")
    ax.plot(epochs, report.val_mse, label="validation")
    if report.best_epoch > 0:
        ax.axvline(report.best_epoch, color="grey", ls="--", lw=0.8, label="best epoch")
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("MSE (normalized units)")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_nmae_bars(report: EvalReport, path: str | Path, title: str) -> Path:
    """Per-virtual-sensor NMAE bars with the average marked."""
    path = Path(path)
    ids = [r.sensor_id for r in report.rows]
    vals = [r.nmae for r in report.rows]
    fig, ax = plt.subplots(figsize=(max(5.0, 0.4 * len(ids) + 2.0), 4.0))
    ax.bar(range(len(ids)), vals, color="steelblue")
    ax.axhline(report.nmae_mean, color="firebrick", ls="--", lw=1.0,
               label=f"mean {report.nmae_mean:.4f}")
    ax.set_xticks(range(len(ids)), ids, rotation=90, fontsize=7)
    ax.set_ylabel("NMAE")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_ksweep_curve(points: Mapping[int, float], path: str | Path, title: str) -> Path:
    """Mean NMAE against the number of retained physical sensors."""
    path = Path(path)
    ks = sorted(points)
    fig, ax = plt.subplots(figsize=(5.2, 4.0))
    ax.plot(ks, [points[k] for k in ks], marker="o")
    ax.set_xticks(ks)
    ax.set_xlabel("physical sensors retained (k)")
    ax.set_ylabel("mean NMAE")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_modality_bars(
    labels: Sequence[str],
    gammas: Sequence[float],
    taus: Sequence[float],
    path: str | Path,
    title: str,
) -> Path:
    """Side-by-side MI / similarity bars for the cross-modality table."""
    path = Path(path)
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(max(5.0, 0.8 * len(labels) + 2.0), 4.0))
    ax.bar(x - 0.2, gammas, width=0.4, label="mutual information (nats)", color="steelblue")
    ax.bar(x + 0.2, taus, width=0.4, label="similarity |cos angle|", color="darkorange")
    ax.set_xticks(x, labels, rotation=30, ha="right")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path
