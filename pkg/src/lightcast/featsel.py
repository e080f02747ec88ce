"""Correlation, plug-in mutual information and greedy mRMR selection."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import NotFittedError, ZeroVarianceError
from .frame import TimeSeriesFrame
from .validation import check_frame, check_pair, check_range

MAX_DEFAULT_BINS = 64


def pearson(x, y) -> float:
    x, y = check_pair(x, y, min_length=2)
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(np.mean(xc * xc))
    sy = math.sqrt(np.mean(yc * yc))
    if sx == 0 or sy == 0:
        raise ZeroVarianceError("pearson correlation undefined for constant input")
    r = float(np.mean(xc * yc) / (sx * sy))
    return min(1.0, max(-1.0, r))


def correlation_matrix(frame: TimeSeriesFrame, columns: Sequence[str] | None = None) -> np.ndarray:
    columns = list(frame.columns if columns is None else columns)
    check_frame(frame, required=columns)
    k = len(columns)
    out = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            out[i, j] = out[j, i] = pearson(frame[columns[i]], frame[columns[j]])
    return out


@dataclass(frozen=True)
class JointHistogram:
    bin_edges_x: np.ndarray
    bin_edges_y: np.ndarray
    counts: np.ndarray
    n: int

    @property
    def pxy(self) -> np.ndarray:
        return self.counts / self.n


def _equal_width_codes(x: np.ndarray, bins: int):
    lo, hi = float(x.min()), float(x.max())
    if hi == lo:
        edges = np.linspace(lo - 0.5, lo + 0.5, bins + 1)
        return np.zeros(x.size, dtype=np.intp), edges
    edges = np.linspace(lo, hi, bins + 1)
    codes = np.floor((x - lo) / (hi - lo) * bins).astype(np.intp)
    # the maximum falls on the last edge; fold it into the final bin
    np.clip(codes, 0, bins - 1, out=codes)
    return codes, edges


def joint_histogram(x, y, bins: int) -> JointHistogram:
    x, y = check_pair(x, y, min_length=1)
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    cx, ex = _equal_width_codes(x, bins)
    cy, ey = _equal_width_codes(y, bins)
    counts = np.bincount(cx * bins + cy, minlength=bins * bins).reshape(bins, bins)
    return JointHistogram(ex, ey, counts, int(x.size))


def default_bins(n: int) -> int:
    return int(min(MAX_DEFAULT_BINS, max(2, math.ceil(math.sqrt(n)))))


def mi_from_histogram(h: JointHistogram) -> float:
    pxy = h.pxy
    px = pxy.sum(axis=1)
    py = pxy.sum(axis=0)
    nz = pxy > 0
    outer = np.outer(px, py)
    return max(0.0, float(np.sum(pxy[nz] * np.log(pxy[nz] / outer[nz]))))


def mutual_information(x, y, bins: int | None = None) -> float:
    """Plug-in MI estimate in nats over an equal-width joint histogram."""
    x, y = check_pair(x, y, min_length=1)
    if bins is None:
        bins = default_bins(x.size)
    return mi_from_histogram(joint_histogram(x, y, bins))


def histogram_entropy(x, bins: int) -> float:
    x = np.asarray(x, dtype=float)
    codes, _ = _equal_width_codes(x, bins)
    p = np.bincount(codes, minlength=bins) / x.size
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


@dataclass
class SelectionState:
    """Outcome of a greedy mRMR run.

    ``steps`` records, per pick, the chosen feature with its relevance and
    the mean redundancy penalty it paid.
    """

    target: str
    full_set: list
    selected: list = field(default_factory=list)
    relevance: dict = field(default_factory=dict)
    redundancy_cache: dict = field(default_factory=dict)
    steps: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "candidates": list(self.full_set),
            "selected": list(self.selected),
            "relevance": {k: float(v) for k, v in self.relevance.items()},
            "steps": [dict(s) for s in self.steps],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)


def mrmr_select(
    frame: TimeSeriesFrame,
    target: str,
    candidates: Sequence[str],
    k: int,
    rows: range | None = None,
    bins: int | None = None,
) -> SelectionState:
    """Greedy mRMR in difference form, restricted to ``rows`` (train rows).

    Ties go to the earlier candidate in ``candidates``.
    """
    candidates = list(candidates)
    if not candidates:
        raise ValueError("candidate list is empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(candidates):
        raise ValueError(f"k={k} exceeds the {len(candidates)} candidates")
    if target in candidates:
        raise ValueError("target must not be among the candidates")
    check_frame(frame, required=[target, *candidates])
    if rows is not None:
        rows = check_range(rows, len(frame))
        frame = frame.rows(rows)
    n = len(frame)
    if bins is None:
        bins = default_bins(n)
    y = frame[target]
    state = SelectionState(target=target, full_set=candidates)
    for f in candidates:
        state.relevance[f] = mutual_information(frame[f], y, bins)

    def redundancy(a: str, b: str) -> float:
        key = (a, b) if candidates.index(a) < candidates.index(b) else (b, a)
        if key not in state.redundancy_cache:
            state.redundancy_cache[key] = mutual_information(frame[key[0]], frame[key[1]], bins)
        return state.redundancy_cache[key]

    remaining = list(candidates)
    while len(state.selected) < k:
        best, best_score, best_pen = None, -math.inf, 0.0
        for f in remaining:
            if state.selected:
                pen = sum(redundancy(f, s) for s in state.selected) / len(state.selected)
            else:
                pen = 0.0
            score = state.relevance[f] - pen
            if score > best_score:
                best, best_score, best_pen = f, score, pen
        state.selected.append(best)
        remaining.remove(best)
        state.steps.append({
            "feature": best,
            "relevance": float(state.relevance[best]),
            "redundancy": float(best_pen),
            "score": float(best_score),
        })
    return state


class MRMRSelector(TransformerMixin, BaseEstimator):
    """Column selector for :class:`TimeSeriesFrame` inputs.

    ``fit`` runs :func:`mrmr_select` on the given rows; ``transform`` keeps
    the target plus the selected features, in selection order.
    """

    def __init__(self, target: str = "pm2_5", candidates: Sequence[str] = (), k: int = 5,
                 rows: range | None = None, bins: int | None = None):
        self.target = target
        self.candidates = candidates
        self.k = k
        self.rows = rows
        self.bins = bins

    def fit(self, X: TimeSeriesFrame, y=None):
        self.state_ = mrmr_select(X, self.target, self.candidates, self.k, self.rows, self.bins)
        self.selected_ = list(self.state_.selected)
        return self

    def get_support(self) -> np.ndarray:
        if not hasattr(self, "selected_"):
            raise NotFittedError("MRMRSelector is not fitted")
        return np.array([c in self.selected_ for c in self.candidates])

    def transform(self, X: TimeSeriesFrame) -> TimeSeriesFrame:
        if not hasattr(self, "selected_"):
            raise NotFittedError("MRMRSelector is not fitted")
        return X.select([self.target, *self.selected_])
