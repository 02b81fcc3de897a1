"""Pairwise phase between dominant variance directions of sensor windows.

Each sensor's windowed frames yield a d x d covariance matrix; the angle
between two sensors' top eigenvectors measures how aligned their dominant
variation patterns are. Small angles flag redundancy, angles near 90 degrees
flag complementary information. The field of all pairwise angles is the
eigen-phase information-density map.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ContractError, InsufficientDataError, NumericError
from .ingest import FrameSet

SYMMETRY_TOLERANCE = 1e-10
GAP_WARNING_THRESHOLD = 0.05
DENSE_SOLVER_MAX_DIM = 512
POWER_ITERATION_TOL = 1e-10
POWER_ITERATION_MAX_STEPS = 10_000


@dataclass(frozen=True)
class CovMatrix:
    """Sample covariance of one sensor's frames (symmetric PSD, d x d)."""

    sensor_id: str
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ContractError(f"covariance must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NumericError(f"{self.sensor_id}: covariance has non-finite entries")
        if np.max(np.abs(m - m.T)) > SYMMETRY_TOLERANCE * max(1.0, np.max(np.abs(m))):
            raise ContractError(f"{self.sensor_id}: covariance is not symmetric")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class PrincipalComponent:
    """Unit-norm top eigenvector of a sensor's frame covariance.

    ``spectral_gap`` is (lambda1 - lambda2) / lambda1; ``gap_warning`` is set
    when it falls below 0.05, i.e. the dominant direction is poorly separated
    and angles involving this sensor should be read with caution.
    """

    sensor_id: str
    vector: np.ndarray
    eigenvalue: float
    spectral_gap: float
    gap_warning: bool = False

    def __post_init__(self) -> None:
        v = np.asarray(self.vector, dtype=np.float64).ravel()
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > 1e-10:
            raise ContractError(f"{self.sensor_id}: eigenvector norm {norm} != 1")
        if self.eigenvalue < 0:
            raise ContractError(f"{self.sensor_id}: negative eigenvalue {self.eigenvalue}")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return self.vector.size


@dataclass(frozen=True)
class AngleField:
    """Symmetric N x N matrix of pairwise eigenvector angles in degrees."""

    sensor_ids: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        n = len(self.sensor_ids)
        if m.shape != (n, n):
            raise ContractError(f"angle matrix shape {m.shape} != ({n}, {n})")
        if np.max(np.abs(m - m.T)) > 1e-9:
            raise ContractError("angle matrix must be symmetric")
        if np.any(m < -1e-9) or np.any(m > 180.0 + 1e-9):
            raise ContractError("angles must lie in [0, 180] degrees")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "sensor_ids", tuple(self.sensor_ids))

    def to_json_dict(self) -> dict:
        return {
            "sensor_ids": list(self.sensor_ids),
            "measure": "eigen_phase_deg",
            "matrix": [[float(v) for v in row] for row in self.matrix],
        }

    def long_rows(self) -> list[tuple[str, str, float, float]]:
        """Plot-ready long form: (sensor_a, sensor_b, omega_deg, tau) per pair."""
        rows = []
        for i, a in enumerate(self.sensor_ids):
            for j in range(i + 1, len(self.sensor_ids)):
                omega = float(self.matrix[i, j])
                rows.append((a, self.sensor_ids[j], omega, similarity_score(omega)))
        return rows


def covariance(frames: FrameSet) -> CovMatrix:
    """Sample covariance of the frame rows: centered X^T X / (n - 1)."""
    x = frames.frames
    n = x.shape[0]
    if n < 2:
        raise InsufficientDataError(f"{frames.sensor_id}: need >= 2 frames, got {n}")
    centered = x - x.mean(axis=0)
    c = centered.T @ centered / (n - 1)
    return CovMatrix(frames.sensor_id, (c + c.T) / 2.0)


def _fix_sign(v: np.ndarray) -> np.ndarray:
    """Deterministic sign: the entry of largest magnitude is made positive."""
    pivot = int(np.argmax(np.abs(v)))
    return -v if v[pivot] < 0 else v.copy()


def _power_iteration(m: np.ndarray) -> tuple[float, np.ndarray]:
    d = m.shape[0]
    # Deterministic start with a mild tilt so no single symmetry traps it.
    v = np.ones(d) + np.linspace(0.0, 0.5, d)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(POWER_ITERATION_MAX_STEPS):
        w = m @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            break
        v = w / norm
        lam = float(v @ (m @ v))
        if np.linalg.norm(m @ v - lam * v) <= POWER_ITERATION_TOL * max(1.0, abs(lam)):
            break
    return lam, v


def principal_eigenvector(cov: CovMatrix) -> PrincipalComponent:
    """Top eigenpair of a symmetric PSD covariance, with deterministic sign.

    Uses a full symmetric eigendecomposition up to dimension 512 and power
    iteration beyond that. Emits a warning (and sets ``gap_warning``) when
    the relative spectral gap is below 0.05; an exactly degenerate spectrum
    still returns the convention-determined vector.

    Raises:
        ContractError: matrix not symmetric PSD or d < 2.
        NumericError: all-zero covariance (no variance direction at all).
    """
    m = cov.matrix
    d = cov.dim
    if d < 2:
        raise ContractError(f"{cov.sensor_id}: need dimension >= 2, got {d}")
    if not np.any(m):
        raise NumericError(f"{cov.sensor_id}: covariance is identically zero")

    if d <= DENSE_SOLVER_MAX_DIM:
        eigvals, eigvecs = np.linalg.eigh(m)
        lam_max = float(eigvals[-1])
        lam_second = float(eigvals[-2])
        vec = eigvecs[:, -1]
        min_eig = float(eigvals[0])
        if min_eig < -1e-8 * max(abs(lam_max), 1e-300):
            raise ContractError(
                f"{cov.sensor_id}: covariance not PSD (min eigenvalue {min_eig:.3g})"
            )
    else:
        lam_max, vec = _power_iteration(m)
        # Deflate once to estimate the runner-up for the gap diagnostic.
        lam_second, _ = _power_iteration(m - lam_max * np.outer(vec, vec))

    gap = (lam_max - lam_second) / lam_max if lam_max > 0 else 0.0
    gap = float(max(gap, 0.0))
    warn = gap < GAP_WARNING_THRESHOLD
    if warn:
        warnings.warn(
            f"{cov.sensor_id}: spectral gap {gap:.4f} < {GAP_WARNING_THRESHOLD}; "
            "dominant direction is weakly determined",
            RuntimeWarning,
            stacklevel=2,
        )
    return PrincipalComponent(
        sensor_id=cov.sensor_id,
        vector=_fix_sign(vec),
        eigenvalue=max(lam_max, 0.0),
        spectral_gap=gap,
        gap_warning=warn,
    )


def angle(a: PrincipalComponent, b: PrincipalComponent) -> float:
    """Angle between two principal directions in degrees, in [0, 180]."""
    if a.dim != b.dim:
        raise ContractError(f"dimension mismatch: {a.dim} vs {b.dim}")
    dot = float(a.vector @ b.vector)
    dot /= float(np.linalg.norm(a.vector) * np.linalg.norm(b.vector))
    return float(np.degrees(np.arccos(np.clip(dot, -1.0, 1.0))))


def angle_field(components: Sequence[PrincipalComponent]) -> AngleField:
    """All pairwise angles as a symmetric field with zero diagonal.

    Pairs are independent, so the loop is safe to parallelize; each result
    lands in its own pair of cells.
    """
    n = len(components)
    if n < 2:
        raise InsufficientDataError(f"need >= 2 sensors, got {n}")
    dims = {c.dim for c in components}
    if len(dims) != 1:
        raise ContractError(f"components disagree on dimension: {sorted(dims)}")
    ids = tuple(c.sensor_id for c in components)
    omega = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            omega[i, j] = omega[j, i] = angle(components[i], components[j])
    return AngleField(ids, omega)


def similarity_score(omega_deg: float) -> float:
    """Cosine-based similarity tau = |cos(omega)| in [0, 1].

    The absolute value keeps the score in range for obtuse angles, which occur
    because eigenvector signs are fixed by a magnitude convention rather than
    by the data.
    """
    if not 0.0 <= omega_deg <= 180.0 + 1e-12:
        raise ContractError(f"angle {omega_deg} outside [0, 180] degrees")
    return float(abs(np.cos(np.radians(omega_deg))))


def angle_field_from_frames(frame_sets: Sequence[FrameSet]) -> AngleField:
    """Convenience: covariance -> top eigenvector -> pairwise angles."""
    comps = [principal_eigenvector(covariance(fs)) for fs in frame_sets]
    return angle_field(comps)


def write_field_json(field, path: str | Path, extra: dict | None = None) -> None:
    """Serialize an AngleField or MiField to JSON (sorted keys, stable bytes)."""
    payload = field.to_json_dict()
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
