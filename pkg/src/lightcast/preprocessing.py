"""Leakage-safe standardization and pipeline-friendly wrappers around the
frame preprocessing steps."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import NotFittedError, ZeroVarianceError
from .frame import TimeSeriesFrame, enforce_hourly_grid, zscore_filter
from .validation import check_frame, check_range


class TrainScaler(TransformerMixin, BaseEstimator):
    """Per-column standardization with statistics taken from the train rows only.

    Parameters
    ----------
    columns : sequence of str
        Columns to scale. Targets should not be listed; they stay in raw units.
    train : range, optional
        Row range used to compute the statistics. ``None`` means all rows of
        the frame passed to :meth:`fit`.

    Attributes
    ----------
    means_, stds_ : ndarray
        Population mean and standard deviation per column.
    """

    def __init__(self, columns: Sequence[str] = (), train: range | None = None):
        self.columns = columns
        self.train = train

    def fit(self, X: TimeSeriesFrame, y=None):
        X = check_frame(X, required=self.columns)
        rows = check_range(self.train, len(X)) if self.train is not None else range(len(X))
        block = X.select(self.columns).values[rows.start:rows.stop]
        means = block.mean(axis=0)
        stds = block.std(axis=0)
        bad = [c for c, s in zip(self.columns, stds) if not s > 0]
        if bad:
            raise ZeroVarianceError(f"constant column(s) in train range: {bad}")
        self.columns_ = tuple(self.columns)
        self.means_ = means
        self.stds_ = stds
        return self

    def _check_fitted(self):
        if not hasattr(self, "means_"):
            raise NotFittedError("TrainScaler is not fitted")

    def transform(self, X: TimeSeriesFrame) -> TimeSeriesFrame:
        self._check_fitted()
        X = check_frame(X, required=self.columns_)
        vals = np.array(X.values, copy=True)
        for c, mu, sd in zip(self.columns_, self.means_, self.stds_):
            j = X.index_of(c)
            vals[:, j] = (vals[:, j] - mu) / sd
        return X.with_values(vals)

    def inverse_transform(self, X: TimeSeriesFrame) -> TimeSeriesFrame:
        self._check_fitted()
        X = check_frame(X, required=self.columns_)
        vals = np.array(X.values, copy=True)
        for c, mu, sd in zip(self.columns_, self.means_, self.stds_):
            j = X.index_of(c)
            vals[:, j] = vals[:, j] * sd + mu
        return X.with_values(vals)

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "columns": list(self.columns_),
            "means": [float(m) for m in self.means_],
            "stds": [float(s) for s in self.stds_],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainScaler":
        obj = cls(columns=tuple(d["columns"]))
        obj.columns_ = tuple(d["columns"])
        obj.means_ = np.asarray(d["means"], dtype=float)
        obj.stds_ = np.asarray(d["stds"], dtype=float)
        return obj


def scaler_fit(frame: TimeSeriesFrame, train: range, columns: Sequence[str]) -> TrainScaler:
    return TrainScaler(columns=tuple(columns), train=train).fit(frame)


def scaler_transform(scaler: TrainScaler, frame: TimeSeriesFrame) -> TimeSeriesFrame:
    return scaler.transform(frame)


class HourlyGrid(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapping :func:`enforce_hourly_grid`."""

    def fit(self, X, y=None):
        return self

    def transform(self, X: TimeSeriesFrame) -> TimeSeriesFrame:
        result = enforce_hourly_grid(X)
        self.gap_log_ = result.gap_log
        return result.frame


class ZScoreFilter(TransformerMixin, BaseEstimator):
    """Anomaly replacement with z-score statistics learned in :meth:`fit`.

    Fitting on the training rows and transforming each split separately keeps
    later rows from influencing which earlier values count as anomalies.
    """

    def __init__(self, threshold: float = 5.0, columns: Sequence[str] | None = None):
        self.threshold = threshold
        self.columns = columns

    def fit(self, X: TimeSeriesFrame, y=None):
        X = check_frame(X)
        cols = list(X.columns if self.columns is None else self.columns)
        self.stats_ = {c: (float(np.mean(X[c])), float(np.std(X[c], ddof=1))) for c in cols}
        return self

    def transform(self, X: TimeSeriesFrame) -> TimeSeriesFrame:
        if not hasattr(self, "stats_"):
            raise NotFittedError("ZScoreFilter is not fitted")
        result = zscore_filter(X, self.threshold, columns=list(self.stats_), stats=self.stats_)
        self.n_replaced_ = result.n_replaced
        self.zero_variance_ = result.zero_variance
        return result.frame
