"""Histogram-based mutual information between sensor series.

Readings are discretized into B bins per sensor and MI is computed from the
empirical joint table in nats. The estimator carries the usual positive
small-sample bias of roughly (B-1)^2 / (2T) nats for independent inputs;
this is documented rather than corrected.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, InsufficientDataError
from .ingest import TimeSeriesMatrix


@dataclass(frozen=True)
class DiscreteSeries:
    """Integer bin codes for one series plus the edges that produced them."""

    symbols: np.ndarray
    bin_edges: np.ndarray
    strategy: str

    def __post_init__(self) -> None:
        symbols = np.asarray(self.symbols, dtype=np.int64).ravel()
        edges = np.asarray(self.bin_edges, dtype=np.float64).ravel()
        if symbols.size == 0:
            raise ContractError("empty symbol stream")
        if edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ContractError("bin edges must be strictly increasing with >= 2 entries")
        n_bins = edges.size - 1
        if symbols.min() < 0 or symbols.max() >= n_bins:
            raise ContractError(f"symbols must lie in [0, {n_bins})")
        symbols = symbols.copy()
        symbols.flags.writeable = False
        edges = edges.copy()
        edges.flags.writeable = False
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "bin_edges", edges)

    @property
    def n_bins(self) -> int:
        return self.bin_edges.size - 1

    def __len__(self) -> int:
        return self.symbols.size


@dataclass(frozen=True)
class MiField:
    """Symmetric N x N mutual-information matrix in nats; diagonal holds H(x)."""

    sensor_ids: tuple[str, ...]
    matrix: np.ndarray
    bins: int
    strategy: str

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        n = len(self.sensor_ids)
        if m.shape != (n, n):
            raise ContractError(f"MI matrix shape {m.shape} != ({n}, {n})")
        if np.max(np.abs(m - m.T)) != 0.0:
            raise ContractError("MI matrix must be exactly symmetric")
        if np.any(m < -1e-12):
            raise ContractError("MI entries must be >= -1e-12")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "sensor_ids", tuple(self.sensor_ids))

    def to_json_dict(self) -> dict:
        return {
            "sensor_ids": list(self.sensor_ids),
            "measure": "mutual_information_nats",
            "bins": self.bins,
            "strategy": self.strategy,
            "matrix": [[float(v) for v in row] for row in self.matrix],
        }

    def long_rows(self) -> list[tuple[str, str, float]]:
        """Plot-ready long form: (sensor_a, sensor_b, gamma_nats) per pair."""
        rows = []
        for i, a in enumerate(self.sensor_ids):
            for j in range(i + 1, len(self.sensor_ids)):
                rows.append((a, self.sensor_ids[j], float(self.matrix[i, j])))
        return rows


def discretize(x: np.ndarray, bins: int = 32, strategy: str = "equal_width") -> DiscreteSeries:
    """Bin a real series into integer codes.

    ``equal_width`` uses B uniform bins over [min, max] with the maximum
    clamped into the top bin. ``equal_frequency`` uses quantile edges; a value
    equal to an internal edge goes to the lower bin. A constant series
    degrades to a single symbol with a warning (its entropy is zero).
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if strategy not in ("equal_width", "equal_frequency"):
        raise ContractError(f"unknown strategy {strategy!r}")
    if bins < 2:
        raise ContractError(f"need >= 2 bins, got {bins}")
    if x.size == 0:
        raise InsufficientDataError("empty series")
    if not np.all(np.isfinite(x)):
        raise ContractError("series must be finite")

    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        warnings.warn(
            "constant series: one symbol, entropy 0", RuntimeWarning, stacklevel=2
        )
        return DiscreteSeries(np.zeros(x.size, dtype=np.int64), np.array([lo - 0.5, lo + 0.5]), strategy)
    if x.size < bins:
        raise InsufficientDataError(f"series length {x.size} < bins {bins}")

    if strategy == "equal_width":
        edges = np.linspace(lo, hi, bins + 1)
        codes = np.minimum(((x - lo) / (hi - lo) * bins).astype(np.int64), bins - 1)
        return DiscreteSeries(codes, edges, strategy)

    # Quantile edges; tied quantiles collapse, so heavy ties yield fewer bins.
    quantiles = np.quantile(x, np.linspace(0.0, 1.0, bins + 1))
    internal = np.unique(quantiles[1:-1])
    internal = internal[(internal > lo) & (internal < hi)]
    codes = np.searchsorted(internal, x, side="left")
    edges = np.concatenate([[lo], internal, [hi]])
    return DiscreteSeries(codes, edges, strategy)


def joint_counts(x: DiscreteSeries, y: DiscreteSeries) -> np.ndarray:
    """Empirical joint contingency table of two symbol streams."""
    if len(x) != len(y):
        raise ContractError(f"length mismatch: {len(x)} vs {len(y)}")
    flat = x.symbols * y.n_bins + y.symbols
    counts = np.bincount(flat, minlength=x.n_bins * y.n_bins)
    return counts.reshape(x.n_bins, y.n_bins)


def _entropy_from_counts(counts: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=np.float64).ravel()
    total = counts.sum()
    if total <= 0:
        raise ContractError("empty count table")
    terms = [-(c / total) * math.log(c / total) for c in counts if c > 0]
    return math.fsum(terms)


def _mi_from_counts(counts: np.ndarray) -> float:
    """MI in nats from a joint count table.

    Each term is written as (c/T) * log(c*T / (row*col)); for an exactly
    factorizing table the log argument is exactly 1, so independence gives
    exactly 0. fsum makes the total independent of cell order, so transposing
    the table cannot change the result even in the last bit.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.ndim != 2:
        raise ContractError(f"joint table must be 2-D, got shape {counts.shape}")
    if np.any(counts < 0):
        raise ContractError("counts must be nonnegative")
    total = float(counts.sum())
    if total <= 0:
        raise ContractError("empty count table")
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    terms = []
    for a in range(counts.shape[0]):
        for b in range(counts.shape[1]):
            c = counts[a, b]
            if c > 0:
                terms.append((c / total) * math.log(c * total / (rows[a] * cols[b])))
    return math.fsum(terms)


def entropy(x: DiscreteSeries) -> float:
    """Shannon entropy of the empirical symbol distribution, in nats."""
    return _entropy_from_counts(np.bincount(x.symbols, minlength=x.n_bins))


def mutual_information(x: DiscreteSeries, y: DiscreteSeries) -> float:
    """MI between two symbol streams in nats, from their empirical joint table."""
    return _mi_from_counts(joint_counts(x, y))


def mi_field(
    matrix: TimeSeriesMatrix, bins: int = 32, strategy: str = "equal_width"
) -> MiField:
    """Pairwise MI over all sensors of an aligned matrix.

    Works on the raw aligned series (each sensor treated as a scalar random
    variable). The diagonal carries each sensor's own entropy. Pairs are
    independent, so the loop is safe to parallelize.
    """
    n = matrix.n_sensors
    if n < 2:
        raise InsufficientDataError(f"need >= 2 sensors, got {n}")
    discretized = [discretize(matrix.values[:, j], bins, strategy) for j in range(n)]
    gamma = np.zeros((n, n))
    for i in range(n):
        gamma[i, i] = entropy(discretized[i])
        for j in range(i + 1, n):
            gamma[i, j] = gamma[j, i] = mutual_information(discretized[i], discretized[j])
    return MiField(matrix.sensor_ids, gamma, bins, strategy)
