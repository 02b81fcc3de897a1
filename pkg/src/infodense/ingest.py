"""Loading, alignment, cleaning, normalization and windowing of sensor series.

Everything downstream consumes one of two shapes produced here: an aligned
T x N :class:`TimeSeriesMatrix` (one column per sensor, no gaps) or a per
sensor n x d :class:`FrameSet` of fixed-length windows.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigError,
    ContractError,
    DegenerateSensorError,
    EmptyResultError,
    InsufficientDataError,
    MissingSensorError,
)

DEFAULT_COLUMNS = {
    "timestamp": "timestamp",
    "sensor_id": "sensor_id",
    "modality": "modality",
    "value": "value",
}

VARIANCE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class RawRecord:
    """One validated reading from a long-format source."""

    timestamp: datetime
    sensor_id: str
    modality: str
    value: float


@dataclass(frozen=True)
class TimeSeriesMatrix:
    """Aligned readings: a strictly increasing time grid by ordered sensors.

    ``values`` is a read-only T x N float64 array whose column order matches
    ``sensor_ids``. Construction validates that the grid is strictly
    increasing and every cell is finite; instances are immutable and safe to
    share across threads.
    """

    timestamps: tuple[datetime, ...]
    sensor_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise ContractError(f"values must be 2-D, got shape {vals.shape}")
        if vals.shape != (len(self.timestamps), len(self.sensor_ids)):
            raise ContractError(
                f"values shape {vals.shape} does not match "
                f"{len(self.timestamps)} timestamps x {len(self.sensor_ids)} sensors"
            )
        if not np.all(np.isfinite(vals)):
            raise ContractError("values must be finite (no NaN/inf cells)")
        for earlier, later in zip(self.timestamps, self.timestamps[1:]):
            if later <= earlier:
                raise ContractError("timestamps must be strictly increasing")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "timestamps", tuple(self.timestamps))
        object.__setattr__(self, "sensor_ids", tuple(str(s) for s in self.sensor_ids))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.values.shape[1]

    def column(self, sensor_id: str) -> np.ndarray:
        """Series of one sensor as a 1-D array."""
        try:
            idx = self.sensor_ids.index(sensor_id)
        except ValueError:
            raise MissingSensorError(f"unknown sensor {sensor_id!r}") from None
        return self.values[:, idx]

    def select(self, sensor_ids: Sequence[str]) -> "TimeSeriesMatrix":
        """Sub-matrix restricted to *sensor_ids*, in the given order."""
        cols = np.stack([self.column(s) for s in sensor_ids], axis=1)
        return TimeSeriesMatrix(self.timestamps, tuple(sensor_ids), cols)


@dataclass(frozen=True)
class FrameSet:
    """Fixed-length windows of one sensor series, stacked as an n x d matrix."""

    sensor_id: str
    frames: np.ndarray
    frame_len: int
    normalization: str = "zscore"

    def __post_init__(self) -> None:
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2:
            raise ContractError(f"frames must be 2-D, got shape {frames.shape}")
        n, d = frames.shape
        if n < 2:
            raise InsufficientDataError(f"{self.sensor_id}: need >= 2 frames, got {n}")
        if d < 2:
            raise ContractError(f"{self.sensor_id}: frame length must be >= 2, got {d}")
        if d != self.frame_len:
            raise ContractError(
                f"{self.sensor_id}: frame_len {self.frame_len} != frame width {d}"
            )
        if self.normalization not in ("zscore", "none"):
            raise ContractError(f"unknown normalization {self.normalization!r}")
        frames = frames.copy()
        frames.flags.writeable = False
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]


@dataclass
class LoadResult:
    """Outcome of parsing a long-format CSV: records plus accept/reject counts."""

    records: list[RawRecord] = field(default_factory=list)
    rows_read: int = 0
    rejected: int = 0


def _parse_timestamp(text: str) -> datetime:
    ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def load_long_csv(
    source: IO[str] | str | Path,
    schema: Mapping[str, str] | None = None,
    strict: bool = False,
) -> LoadResult:
    """Parse a long-format CSV (one reading per row) into RawRecords.

    Args:
        source: path or open text stream with a header row.
        schema: mapping from the canonical names ``timestamp``, ``sensor_id``,
            ``modality``, ``value`` to the column names used in the file.
            Missing entries fall back to the canonical names.
        strict: abort on the first bad row instead of counting and skipping.

    Returns:
        LoadResult with parsed records, total row count and reject count.

    Raises:
        ConfigError: header is missing one of the mapped columns.
        DataError: strict mode and a row failed to parse.
    """
    columns = dict(DEFAULT_COLUMNS)
    if schema:
        unknown = set(schema) - set(DEFAULT_COLUMNS)
        if unknown:
            raise ConfigError(f"unknown schema keys: {sorted(unknown)}")
        columns.update(schema)

    if isinstance(source, (str, Path)):
        stream: IO[str] = open(source, "r", encoding="utf-8", newline="")
        close = True
    else:
        stream = source
        close = False

    result = LoadResult()
    try:
        reader = csv.DictReader(stream)
        if reader.fieldnames is None:
            raise ConfigError("empty input: no CSV header")
        missing = [c for c in columns.values() if c not in reader.fieldnames]
        if missing:
            raise ConfigError(f"header lacks required columns: {missing}")
        for row in reader:
            result.rows_read += 1
            try:
                value = float(row[columns["value"]])
                if not math.isfinite(value):
                    raise ValueError(f"non-finite value {row[columns['value']]!r}")
                record = RawRecord(
                    timestamp=_parse_timestamp(row[columns["timestamp"]]),
                    sensor_id=row[columns["sensor_id"]].strip(),
                    modality=row[columns["modality"]].strip(),
                    value=value,
                )
            except (ValueError, TypeError, KeyError) as exc:
                if strict:
                    raise EmptyResultError(
                        f"row {result.rows_read} unparseable: {exc}"
                    ) from exc
                result.rejected += 1
                continue
            result.records.append(record)
    finally:
        if close:
            stream.close()
    return result


def load_wide_csv(source: IO[str] | str | Path) -> TimeSeriesMatrix:
    """Read an already-aligned wide CSV (timestamp column + one column per sensor)."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return load_wide_csv(fh)
    reader = csv.reader(row for row in source if not row.startswith("#"))
    try:
        header = next(reader)
    except StopIteration:
        raise ConfigError("empty input: no CSV header") from None
    if len(header) < 2:
        raise ConfigError("wide CSV needs a timestamp column plus sensor columns")
    sensor_ids = tuple(h.strip() for h in header[1:])
    timestamps: list[datetime] = []
    rows: list[list[float]] = []
    for i, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise EmptyResultError(f"line {i}: expected {len(header)} cells, got {len(row)}")
        try:
            timestamps.append(_parse_timestamp(row[0]))
            rows.append([float(cell) for cell in row[1:]])
        except ValueError as exc:
            raise EmptyResultError(f"line {i}: {exc}") from exc
    if not rows:
        raise EmptyResultError("wide CSV contains no data rows")
    return TimeSeriesMatrix(tuple(timestamps), sensor_ids, np.array(rows))


def write_wide_csv(matrix: TimeSeriesMatrix, path: str | Path, header_comment: str | None = None) -> None:
    """Write *matrix* as a wide CSV; values use 17 significant digits (round-trip safe)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["timestamp", *matrix.sensor_ids])
        for ts, row in zip(matrix.timestamps, matrix.values):
            writer.writerow([ts.isoformat(), *(f"{v:.17g}" for v in row)])


def _snap(ts: datetime, interval: timedelta) -> datetime:
    epoch = datetime(1970, 1, 1, tzinfo=timezone.utc)
    step = interval.total_seconds()
    offset = (ts - epoch).total_seconds()
    return epoch + timedelta(seconds=math.floor(offset / step) * step)


def align(
    records: Iterable[RawRecord],
    interval: timedelta,
    policy: str = "drop_incomplete",
    sensor_ids: Sequence[str] | None = None,
) -> TimeSeriesMatrix:
    """Snap records onto a fixed-interval grid and resolve gaps.

    Timestamps are floored to the nearest grid instant; duplicate readings of
    one sensor at one instant are averaged (values sorted first, so the result
    depends only on the record multiset, not input order). Under
    ``drop_incomplete`` every retained row has all sensors present; under
    ``forward_fill`` interior gaps take the previous value and rows before a
    sensor's first reading are dropped.

    Raises:
        ContractError: non-positive interval or unknown policy.
        MissingSensorError: a requested sensor has no records.
        EmptyResultError: no rows survive the policy.
    """
    if interval <= timedelta(0):
        raise ContractError(f"interval must be positive, got {interval}")
    if policy not in ("drop_incomplete", "forward_fill"):
        raise ContractError(f"unknown policy {policy!r}")

    cells: dict[tuple[datetime, str], list[float]] = {}
    seen: set[str] = set()
    for rec in records:
        seen.add(rec.sensor_id)
        cells.setdefault((_snap(rec.timestamp, interval), rec.sensor_id), []).append(rec.value)

    ids = tuple(sensor_ids) if sensor_ids is not None else tuple(sorted(seen))
    if not ids:
        raise EmptyResultError("no records to align")
    absent = [s for s in ids if s not in seen]
    if absent:
        raise MissingSensorError(f"no records for sensors: {absent}")

    col = {s: j for j, s in enumerate(ids)}
    instants = sorted({t for (t, s) in cells if s in col})
    grid = np.full((len(instants), len(ids)), np.nan)
    index = {t: i for i, t in enumerate(instants)}
    for (t, s), vals in cells.items():
        if s not in col:
            continue
        grid[index[t], col[s]] = float(np.mean(sorted(vals)))

    if policy == "forward_fill":
        for j in range(grid.shape[1]):
            col = grid[:, j]
            last = np.nan
            for i in range(col.size):
                if np.isnan(col[i]):
                    col[i] = last
                else:
                    last = col[i]

    keep = ~np.isnan(grid).any(axis=1)
    if not keep.any():
        raise EmptyResultError(f"no complete rows after {policy} alignment")
    kept_ts = tuple(t for t, k in zip(instants, keep) if k)
    return TimeSeriesMatrix(kept_ts, ids, grid[keep])


def normalize(matrix: TimeSeriesMatrix) -> TimeSeriesMatrix:
    """Per-sensor z-score: each column to mean 0, unit sample variance (n-1).

    Raises:
        DegenerateSensorError: a column's variance is below tolerance,
            naming the offending sensor.
    """
    vals = matrix.values
    if vals.shape[0] < 2:
        raise InsufficientDataError("need >= 2 rows to normalize")
    var = vals.var(axis=0, ddof=1)
    for sid, v in zip(matrix.sensor_ids, var):
        if v <= VARIANCE_TOLERANCE:
            raise DegenerateSensorError(f"sensor {sid!r} is constant (variance {v:.3g})")
    out = (vals - vals.mean(axis=0)) / np.sqrt(var)
    return TimeSeriesMatrix(matrix.timestamps, matrix.sensor_ids, out)


def window(series: np.ndarray, frame_len: int, stride: int) -> np.ndarray:
    """Slice a 1-D series into floor((T-d)/s)+1 contiguous frames of length d.

    Raises:
        InsufficientDataError: series shorter than one frame.
        ContractError: non-positive stride or frame length.
    """
    x = np.asarray(series, dtype=np.float64).ravel()
    if frame_len < 1 or stride < 1:
        raise ContractError(f"frame_len and stride must be >= 1, got {frame_len}, {stride}")
    if x.size < frame_len:
        raise InsufficientDataError(
            f"series length {x.size} shorter than frame length {frame_len}"
        )
    n = (x.size - frame_len) // stride + 1
    return np.stack([x[i * stride : i * stride + frame_len] for i in range(n)])


def build_frames(
    matrix: TimeSeriesMatrix,
    frame_len: int,
    stride: int | None = None,
    normalization: str = "zscore",
) -> list[FrameSet]:
    """FrameSets for every sensor of *matrix*, z-scoring each column first.

    Stride defaults to the frame length (non-overlapping windows).
    """
    stride = frame_len if stride is None else stride
    source = normalize(matrix) if normalization == "zscore" else matrix
    return [
        FrameSet(sid, window(source.values[:, j], frame_len, stride), frame_len, normalization)
        for j, sid in enumerate(matrix.sensor_ids)
    ]


def downsample(matrix: TimeSeriesMatrix, factor: int, how: str = "mean") -> TimeSeriesMatrix:
    """Reduce the sampling rate by an integer factor (block mean or last value).

    Used to join modalities recorded on different grids: downsample the finer
    one to the coarsest grid before cross-modality analysis. Trailing rows
    that do not fill a block are dropped.
    """
    if factor < 1:
        raise ContractError(f"factor must be >= 1, got {factor}")
    if how not in ("mean", "last"):
        raise ContractError(f"unknown reduction {how!r}")
    if factor == 1:
        return matrix
    n_blocks = matrix.n_samples // factor
    if n_blocks == 0:
        raise InsufficientDataError("series shorter than one downsampling block")
    trimmed = matrix.values[: n_blocks * factor]
    blocks = trimmed.reshape(n_blocks, factor, matrix.n_sensors)
    vals = blocks.mean(axis=1) if how == "mean" else blocks[:, -1, :]
    stamps = tuple(matrix.timestamps[i * factor] for i in range(n_blocks))
    return TimeSeriesMatrix(stamps, matrix.sensor_ids, vals)
