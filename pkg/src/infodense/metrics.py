"""Virtual-sensing evaluation metrics: MAE, NMAE and R-squared.

NMAE divides MAE by one constant per modality: the global max - min of the
true readings across all sensors in the evaluation set. A per-sensor-range
variant exists for fields whose sensors span very different magnitudes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractError, DegenerateSensorError


@dataclass(frozen=True)
class SensorEval:
    """Metrics for one virtual sensor; r2 is None when the truth is constant."""

    sensor_id: str
    mae: float
    nmae: float
    r2: float | None


@dataclass(frozen=True)
class EvalReport:
    """Per-sensor rows plus their arithmetic means and the NMAE denominator."""

    rows: tuple[SensorEval, ...]
    mae_mean: float
    nmae_mean: float
    r2_mean: float | None
    denominator_mode: str
    denominator: float

    def to_json_dict(self) -> dict:
        return {
            "rows": [
                {
                    "sensor_id": r.sensor_id,
                    "mae": r.mae,
                    "nmae": r.nmae,
                    "r2": r.r2,
                }
                for r in self.rows
            ],
            "average": {"mae": self.mae_mean, "nmae": self.nmae_mean, "r2": self.r2_mean},
            "denominator_mode": self.denominator_mode,
            "denominator": self.denominator,
        }


def mae(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Mean absolute error."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ContractError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise ContractError("empty input")
    return float(np.mean(np.abs(y - y_hat)))


def nmae(mae_value: float, denominator: float) -> float:
    """MAE normalized by a modality-level range constant."""
    if not denominator > 0:
        raise DegenerateSensorError(f"NMAE denominator must be > 0, got {denominator}")
    return float(mae_value / denominator)


def r2(y: np.ndarray, y_hat: np.ndarray) -> float | None:
    """Coefficient of determination; None when the truth has zero variance."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ContractError(f"shape mismatch: {y.shape} vs {y_hat.shape}")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return None
    ss_res = float(np.sum((y - y_hat) ** 2))
    return 1.0 - ss_res / ss_tot


def evaluate(
    y_true: np.ndarray,
    y_pred: np.ndarray,
    sensor_ids: Sequence[str],
    denominator_mode: str = "global_range",
) -> EvalReport:
    """Metrics table for a block of virtual sensors.

    Args:
        y_true: T x V true readings for the evaluation rows.
        y_pred: T x V estimates, same layout.
        sensor_ids: V ids, one per column.
        denominator_mode: ``global_range`` (one max - min over all true
            readings, same for every sensor) or ``per_sensor_range``.
    """
    y_true = np.atleast_2d(np.asarray(y_true, dtype=np.float64))
    y_pred = np.atleast_2d(np.asarray(y_pred, dtype=np.float64))
    if y_true.shape != y_pred.shape or y_true.shape[1] != len(sensor_ids):
        raise ContractError(
            f"shapes {y_true.shape} / {y_pred.shape} do not match {len(sensor_ids)} sensors"
        )
    if denominator_mode not in ("global_range", "per_sensor_range"):
        raise ContractError(f"unknown denominator mode {denominator_mode!r}")

    global_den = float(y_true.max() - y_true.min())
    rows = []
    for j, sid in enumerate(sensor_ids):
        col_true = y_true[:, j]
        col_pred = y_pred[:, j]
        m = mae(col_true, col_pred)
        den = global_den if denominator_mode == "global_range" else float(
            col_true.max() - col_true.min()
        )
        rows.append(SensorEval(str(sid), m, nmae(m, den), r2(col_true, col_pred)))

    r2_values = [r.r2 for r in rows if r.r2 is not None]
    return EvalReport(
        rows=tuple(rows),
        mae_mean=float(np.mean([r.mae for r in rows])),
        nmae_mean=float(np.mean([r.nmae for r in rows])),
        r2_mean=float(np.mean(r2_values)) if r2_values else None,
        denominator_mode=denominator_mode,
        denominator=global_den,
    )


def write_eval_csv(
    report: EvalReport,
    path: str | Path,
    physical_ids: Sequence[str] = (),
    header_comment: str | None = None,
) -> None:
    """Write the evaluation table: one row per virtual sensor plus an average row.

    The physical-sensor column lists the retained sensors down its first rows,
    with "-" elsewhere, so a report is readable on its own.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["virtual_sensor_id", "physical_sensor_id", "mae", "r2", "nmae"])
        for i, row in enumerate(report.rows):
            physical = physical_ids[i] if i < len(physical_ids) else "-"
            writer.writerow(
                [
                    row.sensor_id,
                    physical,
                    f"{row.mae:.6f}",
                    "" if row.r2 is None else f"{row.r2:.6f}",
                    f"{row.nmae:.6f}",
                ]
            )
        writer.writerow(
            [
                "average",
                "-",
                f"{report.mae_mean:.6f}",
                "" if report.r2_mean is None else f"{report.r2_mean:.6f}",
                f"{report.nmae_mean:.6f}",
            ]
        )
