"""Synthetic correlated sensor fields with known cluster structure.

Sensors in one cluster share a latent signal (up to per-sensor gain, offset
and noise); distinct clusters use mutually orthogonal latents. The default
latent is an amplitude-modulated integer harmonic: per frame of length d the
waveform is m_i * sin(2*pi*h*tau/d) with a random per-frame amplitude m_i.
Distinct harmonics are exactly orthogonal on the frame grid, so each cluster
plants a unique dominant variance direction; a pure unmodulated sinusoid
would leave the frame covariance with a degenerate sine/cosine eigenpair and
no stable dominant direction.

Also hosts the brute-force oracles (closed-form / grid eigenpairs, literal
triple-loop MI) used to cross-check the analysis modules.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import ContractError
from .ingest import TimeSeriesMatrix


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic field; identical seeds give identical output."""

    n_clusters: int = 3
    sensors_per_cluster: int = 4
    n_samples: int = 5000
    frame_len: int = 48
    waveform: str = "sinusoid_mix"  # or "smoothed_noise"
    gain_range: tuple[float, float] = (0.8, 1.2)
    offset_range: tuple[float, float] = (-1.0, 1.0)
    noise_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_clusters < 1 or self.sensors_per_cluster < 1:
            raise ContractError("need >= 1 cluster and >= 1 sensor per cluster")
        if self.n_samples < 2 * self.frame_len:
            raise ContractError("n_samples must cover at least two frames")
        if self.frame_len < 2 * self.n_clusters + 2:
            raise ContractError(
                f"frame_len {self.frame_len} too short for {self.n_clusters} "
                "orthogonal harmonics (need > 2 * n_clusters + 1)"
            )
        if self.noise_sigma < 0:
            raise ContractError("noise_sigma must be >= 0")
        if self.waveform not in ("sinusoid_mix", "smoothed_noise"):
            raise ContractError(f"unknown waveform {self.waveform!r}")


@dataclass(frozen=True)
class GroundTruth:
    """Planted structure: sensor-to-cluster map and the latent signals."""

    cluster_of: dict[str, int]
    latents: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "cluster_of": dict(self.cluster_of),
            "latents": [[float(v) for v in row] for row in self.latents],
        }


def _sinusoid_mix_latents(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(spec.n_samples)
    frame_idx = t // spec.frame_len
    tau = t % spec.frame_len
    n_frames = int(frame_idx[-1]) + 1
    latents = np.empty((spec.n_clusters, spec.n_samples))
    for j in range(spec.n_clusters):
        harmonic = j + 1
        pattern = np.sin(2.0 * np.pi * harmonic * tau / spec.frame_len)
        modulation = rng.uniform(0.5, 1.5, size=n_frames)
        latents[j] = modulation[frame_idx] * pattern
    return latents


def _smoothed_noise_latents(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    # Gaussian-smoothed white noise, unit variance. Clusters are independent
    # realizations; their dominant frame directions separate less sharply
    # than with the harmonic default.
    width = max(2, spec.frame_len // 8)
    grid = np.arange(-3 * width, 3 * width + 1)
    kernel = np.exp(-0.5 * (grid / width) ** 2)
    kernel /= kernel.sum()
    latents = np.empty((spec.n_clusters, spec.n_samples))
    for j in range(spec.n_clusters):
        white = rng.standard_normal(spec.n_samples + grid.size - 1)
        smooth = np.convolve(white, kernel, mode="valid")
        latents[j] = (smooth - smooth.mean()) / smooth.std()
    return latents


def generate(spec: SynthSpec) -> tuple[TimeSeriesMatrix, GroundTruth]:
    """Build the field: sensor s in cluster j reads gain_s*z_j(t) + offset_s + noise.

    Sensor ids are s00, s01, ... assigned to clusters in contiguous blocks;
    timestamps form a 15-minute grid. Deterministic per seed.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.waveform == "sinusoid_mix":
        latents = _sinusoid_mix_latents(spec, rng)
    else:
        latents = _smoothed_noise_latents(spec, rng)

    n_sensors = spec.n_clusters * spec.sensors_per_cluster
    gains = rng.uniform(*spec.gain_range, size=n_sensors)
    offsets = rng.uniform(*spec.offset_range, size=n_sensors)
    noise = rng.normal(0.0, spec.noise_sigma, size=(spec.n_samples, n_sensors))

    values = np.empty((spec.n_samples, n_sensors))
    cluster_of: dict[str, int] = {}
    ids = []
    for s in range(n_sensors):
        cluster = s // spec.sensors_per_cluster
        sid = f"s{s:02d}"
        ids.append(sid)
        cluster_of[sid] = cluster
        values[:, s] = gains[s] * latents[cluster] + offsets[s] + noise[:, s]

    start = datetime(2023, 1, 1, tzinfo=timezone.utc)
    stamps = tuple(start + timedelta(minutes=15 * i) for i in range(spec.n_samples))
    matrix = TimeSeriesMatrix(stamps, tuple(ids), values)
    return matrix, GroundTruth(cluster_of, latents)


def write_ground_truth(truth: GroundTruth, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(truth.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------


def oracle_mi(joint: np.ndarray) -> float:
    """Literal triple-quantity MI sum over a joint count table, in nats.

    Normalizes counts to probabilities and evaluates
    sum_ab p(a,b) * log(p(a,b) / (p(a) p(b))) with plain loops. Kept
    deliberately naive and separate from the production estimator.
    """
    table = np.asarray(joint, dtype=np.float64)
    if table.ndim != 2 or np.any(table < 0) or table.sum() <= 0:
        raise ContractError("joint table must be 2-D, nonnegative, nonempty")
    p = table / table.sum()
    p_a = p.sum(axis=1)
    p_b = p.sum(axis=0)
    total = 0.0
    for a in range(p.shape[0]):
        for b in range(p.shape[1]):
            if p[a, b] > 0:
                total += p[a, b] * math.log(p[a, b] / (p_a[a] * p_b[b]))
    return total


def _grid_argmax_rayleigh(c: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Maximize v^T C v over the unit sphere by shrinking grid search (3x3)."""

    def unit(theta: float, phi: float) -> np.ndarray:
        s = math.sin(theta)
        return np.array([s * math.cos(phi), s * math.sin(phi), math.cos(theta)])

    best = (0.0, 0.0)
    best_val = -math.inf
    span_theta, span_phi = math.pi / 2, math.pi
    centre = (math.pi / 2, 0.0)
    # First sweep covers a half-sphere (v and -v are equivalent).
    while True:
        thetas = np.linspace(centre[0] - span_theta, centre[0] + span_theta, 41)
        phis = np.linspace(centre[1] - span_phi, centre[1] + span_phi, 81)
        for theta in thetas:
            for phi in phis:
                v = unit(theta, phi)
                val = float(v @ c @ v)
                if val > best_val:
                    best_val = val
                    best = (theta, phi)
        if span_theta < tol:
            break
        centre = best
        span_theta *= 0.15
        span_phi *= 0.15
    return unit(*best)


def oracle_eigen(c: np.ndarray) -> tuple[np.ndarray, float]:
    """Principal eigenpair of a 2x2 or 3x3 symmetric matrix, solver-free.

    2x2 uses the characteristic polynomial in closed form; 3x3 maximizes the
    Rayleigh quotient by exhaustive grid refinement. The returned vector has
    its largest-magnitude entry positive.
    """
    c = np.asarray(c, dtype=np.float64)
    if c.shape == (2, 2):
        a, b, d = c[0, 0], c[0, 1], c[1, 1]
        lam = 0.5 * ((a + d) + math.sqrt((a - d) ** 2 + 4.0 * b * b))
        if b == 0.0:
            vec = np.array([1.0, 0.0]) if a >= d else np.array([0.0, 1.0])
        else:
            vec = np.array([b, lam - a])
            vec = vec / np.linalg.norm(vec)
    elif c.shape == (3, 3):
        vec = _grid_argmax_rayleigh(c)
        lam = float(vec @ c @ vec)
    else:
        raise ContractError(f"oracle handles 2x2 and 3x3 only, got {c.shape}")
    pivot = int(np.argmax(np.abs(vec)))
    if vec[pivot] < 0:
        vec = -vec
    return vec, float(lam)
