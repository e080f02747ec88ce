"""Input validation helpers shared by the estimators."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .exceptions import FrameError, InsufficientDataError


def check_frame(X, required: Iterable[str] = (), hourly: bool = False):
    from .frame import TimeSeriesFrame

    if not isinstance(X, TimeSeriesFrame):
        raise TypeError(f"expected TimeSeriesFrame, got {type(X).__name__}")
    missing = [c for c in required if c not in X.columns]
    if missing:
        raise KeyError(f"missing column(s) {missing}; frame has {list(X.columns)}")
    if hourly and not X.is_hourly():
        raise FrameError("frame is not on a gap-free hourly grid")
    return X


def check_range(r, n: int) -> range:
    if isinstance(r, slice):
        r = range(*r.indices(n))
    elif isinstance(r, (tuple, list)):
        r = range(int(r[0]), int(r[1]))
    if not isinstance(r, range) or r.step != 1:
        raise TypeError("row ranges must be contiguous ranges")
    if len(r) == 0:
        raise InsufficientDataError("row range is empty")
    if r.start < 0 or r.stop > n:
        raise IndexError(f"range {r} outside frame of {n} rows")
    return r


def check_vector(x, name: str = "x", min_length: int = 1) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        x = x.reshape(-1)
    if x.size < min_length:
        raise ValueError(f"{name} needs at least {min_length} values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def check_pair(y, yhat, min_length: int = 1):
    y = np.asarray(y, dtype=float).reshape(-1)
    yhat = np.asarray(yhat, dtype=float).reshape(-1)
    if y.size != yhat.size:
        raise ValueError(f"length mismatch: {y.size} != {yhat.size}")
    if y.size < min_length:
        raise ValueError(f"need at least {min_length} samples, got {y.size}")
    return y, yhat


def check_matrix(X, n_features: int | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"expected 2-D array, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} feature columns, got {X.shape[1]}")
    return X
