"""Sensor ranking and subset selection from information-density fields.

Angle-based ranking keeps the sensors whose dominant variance direction is
most aligned with the rest of the field (lowest mean pairwise angle);
MI-based ranking keeps the sensors sharing the most information with the
rest (highest mean pairwise MI). Random, variance and mean-|Pearson|
selectors serve as baselines. Ties always break by ascending sensor id so
every method is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .eigenphase import (
    AngleField,
    CovMatrix,
    angle,
    covariance,
    principal_eigenvector,
    similarity_score,
)
from .errors import ContractError
from .ingest import FrameSet, TimeSeriesMatrix, normalize
from .mutualinfo import MiField, discretize, mutual_information

METHODS = ("eigen_angle", "mutual_info", "random", "variance", "correlation")


@dataclass(frozen=True)
class SelectionResult:
    """Full ranking plus the chosen top-k subset for one method."""

    method: str
    ranked_ids: tuple[str, ...]
    scores: dict[str, float]
    k: int
    selected: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ContractError(f"unknown method {self.method!r}")
        if sorted(self.ranked_ids) != sorted(self.scores):
            raise ContractError("ranking and scores disagree on sensor ids")
        if not 1 <= self.k <= len(self.ranked_ids):
            raise ContractError(f"k={self.k} outside [1, {len(self.ranked_ids)}]")
        if tuple(self.selected) != tuple(self.ranked_ids[: self.k]):
            raise ContractError("selected must be the length-k prefix of the ranking")

    @property
    def rejected(self) -> tuple[str, ...]:
        """Sensors past the cut, i.e. the virtual-sensor candidates."""
        return self.ranked_ids[self.k :]

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "ranked_ids": list(self.ranked_ids),
            "scores": {s: float(v) for s, v in self.scores.items()},
            "selected": list(self.selected),
        }


@dataclass(frozen=True)
class ModalityIdReport:
    """Information-density triple between two modalities."""

    modality_a: str
    modality_b: str
    omega_deg: float
    tau: float
    gamma_nats: float

    def __post_init__(self) -> None:
        if abs(self.tau - similarity_score(self.omega_deg)) > 1e-9:
            raise ContractError("tau must equal |cos(omega)|")
        if self.gamma_nats < -1e-12:
            raise ContractError(f"negative MI {self.gamma_nats}")


@dataclass(frozen=True)
class SufficiencyReport:
    """Outcome of the divergence threshold check across configurations."""

    passed: bool
    epsilon: float
    max_divergence: float
    worst_pair: tuple[str, str]
    errors_by_config: dict[str, float]

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "epsilon": self.epsilon,
            "max_divergence": self.max_divergence,
            "worst_pair": list(self.worst_pair),
            "errors_by_config": {k: float(v) for k, v in self.errors_by_config.items()},
        }


def _ranked(scores: dict[str, float], k: int, method: str, descending: bool) -> SelectionResult:
    if not 1 <= k <= len(scores):
        raise ContractError(f"k={k} outside [1, {len(scores)}]")
    sign = -1.0 if descending else 1.0
    order = sorted(scores, key=lambda s: (sign * scores[s], s))
    return SelectionResult(method, tuple(order), scores, k, tuple(order[:k]))


def rank_by_angle(field: AngleField, k: int) -> SelectionResult:
    """Top-k sensors by lowest mean pairwise angle (most representative)."""
    n = len(field.sensor_ids)
    means = (field.matrix.sum(axis=1)) / (n - 1)  # diagonal is zero
    scores = {s: float(m) for s, m in zip(field.sensor_ids, means)}
    return _ranked(scores, k, "eigen_angle", descending=False)


def rank_by_mi(field: MiField, k: int) -> SelectionResult:
    """Top-k sensors by highest mean pairwise MI (diagonal entropy excluded)."""
    n = len(field.sensor_ids)
    off_sum = field.matrix.sum(axis=1) - np.diag(field.matrix)
    scores = {s: float(m) for s, m in zip(field.sensor_ids, off_sum / (n - 1))}
    return _ranked(scores, k, "mutual_info", descending=True)


def baseline_random(ids: Sequence[str], k: int, seed: int) -> SelectionResult:
    """Seeded uniform selection; equivariant under input reordering.

    Scores are random draws assigned after sorting ids, so the outcome
    depends only on the id set and the seed, never on input order.
    """
    ids_sorted = sorted(str(s) for s in ids)
    if len(set(ids_sorted)) != len(ids_sorted):
        raise ContractError("duplicate sensor ids")
    rng = np.random.default_rng(seed)
    draws = rng.random(len(ids_sorted))
    scores = {s: float(d) for s, d in zip(ids_sorted, draws)}
    return _ranked(scores, k, "random", descending=False)


def baseline_variance(matrix: TimeSeriesMatrix, k: int) -> SelectionResult:
    """Rank by raw per-sensor sample variance, highest first."""
    var = matrix.values.var(axis=0, ddof=1)
    scores = {s: float(v) for s, v in zip(matrix.sensor_ids, var)}
    return _ranked(scores, k, "variance", descending=True)


def baseline_correlation(matrix: TimeSeriesMatrix, k: int) -> SelectionResult:
    """Rank by mean absolute Pearson correlation with the other sensors."""
    z = normalize(matrix).values  # raises DegenerateSensorError on constants
    n = matrix.n_sensors
    if n < 2:
        raise ContractError("need >= 2 sensors")
    t = z.shape[0]
    corr = z.T @ z / (t - 1)
    np.fill_diagonal(corr, 0.0)
    means = np.abs(corr).sum(axis=1) / (n - 1)
    scores = {s: float(m) for s, m in zip(matrix.sensor_ids, means)}
    return _ranked(scores, k, "correlation", descending=True)


def block_surrogate(block: TimeSeriesMatrix) -> np.ndarray:
    """Scalar stand-in for a multi-sensor modality block.

    Z-scores the block, takes the principal eigenvector of its sensor-space
    covariance, and projects every row onto it: the score series of the
    block's dominant component.
    """
    if block.n_sensors == 1:
        return block.values[:, 0].copy()
    z = normalize(block).values
    cov = np.cov(z, rowvar=False, ddof=1)
    label = "+".join(block.sensor_ids)
    comp = principal_eigenvector(CovMatrix(label, (cov + cov.T) / 2.0))
    return z @ comp.vector


def modality_id(
    frames_a: FrameSet,
    series_a: np.ndarray,
    frames_b: FrameSet,
    series_b: np.ndarray,
    bins: int = 32,
    strategy: str = "equal_width",
) -> ModalityIdReport:
    """Information-density triple between two modalities.

    The angle comes from the principal directions of the two frame sets
    (common frame length required); the MI comes from the aligned scalar
    series. For multi-sensor blocks pass the projection surrogate from
    :func:`block_surrogate` as the scalar series and frame its output.
    """
    if frames_a.frame_len != frames_b.frame_len:
        raise ContractError(
            f"frame length mismatch: {frames_a.frame_len} vs {frames_b.frame_len}"
        )
    series_a = np.asarray(series_a, dtype=np.float64).ravel()
    series_b = np.asarray(series_b, dtype=np.float64).ravel()
    if series_a.size != series_b.size:
        raise ContractError(f"series length mismatch: {series_a.size} vs {series_b.size}")
    comp_a = principal_eigenvector(covariance(frames_a))
    comp_b = principal_eigenvector(covariance(frames_b))
    omega = angle(comp_a, comp_b)
    gamma = mutual_information(
        discretize(series_a, bins, strategy), discretize(series_b, bins, strategy)
    )
    return ModalityIdReport(
        modality_a=frames_a.sensor_id,
        modality_b=frames_b.sensor_id,
        omega_deg=omega,
        tau=similarity_score(omega),
        gamma_nats=gamma,
    )


def per_species_mi_mean(
    block: TimeSeriesMatrix,
    series: np.ndarray,
    bins: int = 32,
    strategy: str = "equal_width",
) -> float:
    """Alternative block MI: mean of per-sensor MI against the scalar series."""
    target = discretize(np.asarray(series, dtype=np.float64).ravel(), bins, strategy)
    values = [
        mutual_information(discretize(block.values[:, j], bins, strategy), target)
        for j in range(block.n_sensors)
    ]
    return float(np.mean(values))


def sufficiency_check(errors_by_config: Mapping[str, float], epsilon: float) -> SufficiencyReport:
    """Do all configurations agree within the divergence threshold?

    Passes iff the largest pairwise |NMAE_i - NMAE_j| across configurations
    is below epsilon.
    """
    if epsilon <= 0 or not math.isfinite(epsilon):
        raise ContractError(f"epsilon must be positive and finite, got {epsilon}")
    items = sorted(errors_by_config.items())
    if len(items) < 2:
        raise ContractError(f"need >= 2 configurations, got {len(items)}")
    worst = (items[0][0], items[1][0])
    max_div = 0.0
    for i, (name_i, err_i) in enumerate(items):
        for name_j, err_j in items[i + 1 :]:
            div = abs(err_i - err_j)
            if div > max_div:
                max_div = div
                worst = (name_i, name_j)
    return SufficiencyReport(
        passed=max_div < epsilon,
        epsilon=float(epsilon),
        max_divergence=float(max_div),
        worst_pair=worst,
        errors_by_config={k: float(v) for k, v in items},
    )
