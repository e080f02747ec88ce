"""Hourly multi-variable time-series container and the preprocessing steps
that operate on it: grid enforcement, z-score anomaly filtering and the
chronological train/val/test split.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from os import PathLike
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DuplicateTimestampError, FrameError, InsufficientDataError

logger = logging.getLogger(__name__)

HOUR = 3600
TEST_HOURS = 168


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def format_timestamp(ts: int) -> str:
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_timestamp(text: str) -> int:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


@dataclass(frozen=True)
class TimeSeriesFrame:
    """Aligned hourly matrix indexed by UTC epoch seconds.

    Parameters
    ----------
    timestamps : array of int
        Strictly increasing epoch seconds (UTC).
    columns : sequence of str
        Unique variable names, one per column of ``values``.
    values : 2-D array, shape (n_rows, n_columns)
    """

    timestamps: np.ndarray
    columns: tuple
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64).reshape(-1)
        vals = np.asarray(self.values, dtype=float)
        cols = tuple(str(c) for c in self.columns)
        if vals.ndim == 1 and len(cols) == 1:
            vals = vals.reshape(-1, 1)
        if vals.ndim != 2:
            raise FrameError(f"values must be 2-D, got shape {vals.shape}")
        if vals.shape != (ts.size, len(cols)):
            raise FrameError(
                f"values shape {vals.shape} does not match "
                f"{ts.size} timestamps x {len(cols)} columns"
            )
        if len(set(cols)) != len(cols):
            raise FrameError(f"duplicate column names in {cols}")
        object.__setattr__(self, "timestamps", _readonly(ts))
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "values", _readonly(vals))

    def __len__(self) -> int:
        return self.timestamps.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeriesFrame):
            return NotImplemented
        return (
            self.columns == other.columns
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def hours(self) -> np.ndarray:
        """Absolute hour index (epoch seconds / 3600)."""
        return self.timestamps / HOUR

    def index_of(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise KeyError(f"column {name!r} not in frame {list(self.columns)}") from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index_of(name)]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.column(name)

    def select(self, names: Iterable[str]) -> "TimeSeriesFrame":
        names = list(names)
        idx = [self.index_of(n) for n in names]
        return TimeSeriesFrame(self.timestamps, names, self.values[:, idx])

    def rows(self, rows) -> "TimeSeriesFrame":
        """Row subset by slice, ``range`` or index array."""
        if isinstance(rows, range):
            rows = slice(rows.start, rows.stop)
        return TimeSeriesFrame(self.timestamps[rows], self.columns, self.values[rows])

    def with_values(self, values: np.ndarray) -> "TimeSeriesFrame":
        return TimeSeriesFrame(self.timestamps, self.columns, values)

    def with_column(self, name: str, values: np.ndarray) -> "TimeSeriesFrame":
        vals = np.array(self.values, copy=True)
        if name in self.columns:
            vals[:, self.index_of(name)] = values
            return TimeSeriesFrame(self.timestamps, self.columns, vals)
        vals = np.column_stack([vals, np.asarray(values, dtype=float)])
        return TimeSeriesFrame(self.timestamps, self.columns + (name,), vals)

    def is_hourly(self) -> bool:
        return len(self) < 2 or bool(np.all(np.diff(self.timestamps) == HOUR))

    def to_pandas(self):
        import pandas as pd

        index = pd.to_datetime(self.timestamps, unit="s", utc=True)
        return pd.DataFrame(np.array(self.values), index=index, columns=list(self.columns))

    @classmethod
    def from_pandas(cls, df) -> "TimeSeriesFrame":
        import pandas as pd

        index = pd.DatetimeIndex(df.index)
        if index.tz is None:
            index = index.tz_localize("UTC")
        ts = (index.tz_convert("UTC").asi8 // 1_000_000_000).astype(np.int64)
        return cls(ts, list(df.columns), df.to_numpy(dtype=float))

    # CSV interchange: header "timestamp,<col>,...", ISO-8601 UTC timestamps.

    def to_csv(self, path: str | PathLike | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["timestamp", *self.columns])
        for ts, row in zip(self.timestamps, self.values):
            writer.writerow([format_timestamp(ts), *(repr(float(v)) for v in row)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_buffer) -> "TimeSeriesFrame":
        if isinstance(path_or_buffer, (str, PathLike)):
            with open(path_or_buffer, encoding="utf-8", newline="") as fh:
                rows = list(csv.reader(fh))
        else:
            rows = list(csv.reader(path_or_buffer))
        if not rows or not rows[0] or rows[0][0] != "timestamp":
            raise FrameError("CSV header must start with 'timestamp'")
        header = rows[0][1:]
        body = [r for r in rows[1:] if r]
        ts = np.array([parse_timestamp(r[0]) for r in body], dtype=np.int64)
        vals = np.array([[float(x) for x in r[1:]] for r in body], dtype=float)
        return cls(ts, header, vals.reshape(len(body), len(header)))


@dataclass(frozen=True)
class SplitIndices:
    """Contiguous chronological index ranges; test always holds the last 168 rows."""

    train: range
    val: range
    test: range

    def __post_init__(self):
        if not (self.train.stop == self.val.start and self.val.stop == self.test.start):
            raise FrameError("split ranges must be contiguous")
        if len(self.train) == 0 or len(self.val) == 0 or len(self.test) == 0:
            raise FrameError("split ranges must be nonempty")

    @property
    def n_rows(self) -> int:
        return self.test.stop

    def to_dict(self) -> dict:
        return {k: [r.start, r.stop] for k, r in
                (("train", self.train), ("val", self.val), ("test", self.test))}


@dataclass(frozen=True)
class GridResult:
    frame: TimeSeriesFrame
    gap_log: list = field(default_factory=list)


@dataclass(frozen=True)
class FilterResult:
    frame: TimeSeriesFrame
    n_replaced: int
    replaced: dict
    zero_variance: list


def _check_timestamps(ts: np.ndarray) -> None:
    if ts.size < 2:
        raise InsufficientDataError("at least 2 timestamps are required")
    d = np.diff(ts)
    if np.any(d == 0):
        dup = ts[1:][d == 0][0]
        raise DuplicateTimestampError(f"duplicate timestamp {format_timestamp(dup)}")
    if np.any(d < 0):
        raise FrameError("timestamps must be strictly increasing")


def enforce_hourly_grid(frame: TimeSeriesFrame) -> GridResult:
    """Reindex onto the full hourly grid between the first and last timestamp.

    Missing hours are filled by per-column linear interpolation and listed
    in ``gap_log`` as epoch seconds. Timestamps off the hour grid anchored at
    the first row are rejected.
    """
    ts = frame.timestamps
    _check_timestamps(ts)
    if np.any((ts - ts[0]) % HOUR):
        raise FrameError("timestamps are not aligned to the hourly grid")
    grid = np.arange(ts[0], ts[-1] + 1, HOUR, dtype=np.int64)
    if grid.size == ts.size:
        return GridResult(frame, [])
    present = np.isin(grid, ts)
    gaps = grid[~present]
    values = np.empty((grid.size, len(frame.columns)))
    for j in range(len(frame.columns)):
        values[:, j] = np.interp(grid, ts, frame.values[:, j])
    logger.info("filled %d missing hours by interpolation", gaps.size)
    return GridResult(TimeSeriesFrame(grid, frame.columns, values), [int(g) for g in gaps])


def _fill_flagged(x: np.ndarray, bad: np.ndarray) -> np.ndarray:
    """Linear interpolation over flagged positions; edges take the nearest valid value."""
    good = ~bad
    out = x.copy()
    if not good.any():
        return out
    pos = np.arange(x.size)
    out[bad] = np.interp(pos[bad], pos[good], x[good])
    return out


def zscore_filter(
    frame: TimeSeriesFrame,
    threshold: float = 5.0,
    columns: Sequence[str] | None = None,
    stats: dict | None = None,
) -> FilterResult:
    """Replace values with ``|z| > threshold`` by neighbour interpolation.

    ``stats`` optionally maps column -> (mean, std) so that z-scores can be
    computed from a reference window (e.g. the training rows) rather than
    the frame itself. Self-computed scores use the sample standard deviation.
    Zero-variance columns are reported and left as-is.
    """
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if not frame.is_hourly():
        raise FrameError("zscore_filter expects a gap-free hourly frame")
    columns = list(frame.columns if columns is None else columns)
    values = np.array(frame.values, copy=True)
    replaced = {}
    zero_var = []
    for name in columns:
        j = frame.index_of(name)
        x = values[:, j]
        if stats is not None and name in stats:
            mu, sd = stats[name]
        else:
            mu, sd = float(np.mean(x)), float(np.std(x, ddof=1)) if x.size > 1 else 0.0
        if not sd > 0 or not np.isfinite(sd):
            zero_var.append(name)
            continue
        bad = np.abs((x - mu) / sd) > threshold
        k = int(bad.sum())
        if k:
            values[:, j] = _fill_flagged(x, bad)
            replaced[name] = k
    if zero_var:
        logger.warning("zero-variance columns left untouched: %s", zero_var)
    return FilterResult(frame.with_values(values), sum(replaced.values()), replaced, zero_var)


def chronological_split(frame_or_n, test_size: int = TEST_HOURS, train_ratio: float = 8 / 9) -> SplitIndices:
    """Carve the last ``test_size`` rows for test, then split the rest 8:1."""
    n_total = frame_or_n if isinstance(frame_or_n, (int, np.integer)) else len(frame_or_n)
    n = n_total - test_size
    if n < 2:
        raise InsufficientDataError(
            f"need more than {test_size + 1} rows for a train/val/test split, got {n_total}"
        )
    n_train = int(round(n * train_ratio))
    n_train = min(max(n_train, 1), n - 1)
    return SplitIndices(range(0, n_train), range(n_train, n), range(n, n_total))
