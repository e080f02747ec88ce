"""Additive trend + Fourier seasonality + regressor forecaster.

The model is ``y(t) = g(t) + s(t) + h(t) + noise`` with a piecewise-linear
trend ``g`` (hinge changepoints), Fourier seasonal terms ``s`` and linear
regressor effects ``h``. Coefficients come from one ridge least-squares
solve; only changepoint deltas (and optionally regressors) are penalized.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from ..exceptions import InsufficientDataError, NotFittedError, ShortHistoryWarning
from ..frame import HOUR, TimeSeriesFrame
from ..validation import check_frame, check_range, check_vector
from ._linear import ridge_solve

MODEL_VERSION = 1
WEEKLY = ("weekly", 168.0, 3)
YEARLY = ("yearly", 8766.0, 10)


@dataclass(frozen=True)
class AdditiveConfig:
    n_changepoints: int = 25
    changepoint_range: float = 0.8
    seasonalities: tuple = (WEEKLY, YEARLY)
    regressors: tuple = ()
    trend_penalty: float = 10.0
    regressor_penalty: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "seasonalities",
                           tuple((str(n), float(p), int(o)) for n, p, o in self.seasonalities))
        object.__setattr__(self, "regressors", tuple(self.regressors))
        validate_config(self)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seasonalities"] = [list(s) for s in self.seasonalities]
        d["regressors"] = list(self.regressors)
        return d


def validate_config(cfg) -> None:
    if cfg.n_changepoints < 0:
        raise ValueError("n_changepoints must be >= 0")
    if not 0 < cfg.changepoint_range <= 1:
        raise ValueError("changepoint_range must lie in (0, 1]")
    if cfg.trend_penalty < 0 or cfg.regressor_penalty < 0:
        raise ValueError("penalties must be >= 0")
    names = set()
    for name, period, order in cfg.seasonalities:
        if period <= 0:
            raise ValueError(f"seasonality {name!r}: period must be > 0")
        if order < 1:
            raise ValueError(f"seasonality {name!r}: fourier_order must be >= 1")
        if name in names:
            raise ValueError(f"duplicate seasonality {name!r}")
        names.add(name)


def fourier_terms(hours: np.ndarray, period: float, order: int) -> np.ndarray:
    """Columns ``sin(2 pi k h / period), cos(2 pi k h / period)`` for k = 1..order."""
    out = np.empty((hours.size, 2 * order))
    for k in range(1, order + 1):
        arg = 2.0 * np.pi * k * hours / period
        out[:, 2 * k - 2] = np.sin(arg)
        out[:, 2 * k - 1] = np.cos(arg)
    return out


@dataclass
class DesignMatrix:
    matrix: np.ndarray
    names: list
    penalty: np.ndarray
    blocks: dict = field(default_factory=dict)


class AdditiveForecaster(RegressorMixin, BaseEstimator):
    """Prophet-style additive forecaster fit in closed form.

    Parameters
    ----------
    n_changepoints : int
        Number of trend hinges, spread uniformly over the first
        ``changepoint_range`` of the training span.
    changepoint_range : float
    seasonalities : sequence of (name, period_hours, fourier_order)
        Defaults to weekly (168 h, order 3) and yearly (8766 h, order 10).
    regressors : sequence of str
        Columns of ``X`` entering linearly. Pass them pre-scaled.
    trend_penalty : float
        Ridge weight on the changepoint deltas.
    regressor_penalty : float
        Ridge weight on the regressor coefficients.

    Attributes
    ----------
    k_, m_ : float
        Base slope and offset in normalized time.
    changepoints_ : ndarray
        Hinge locations in normalized time.
    deltas_ : ndarray
        Slope changes at each hinge.
    seasonal_coefs_ : dict
        name -> array ``[sin_1, cos_1, sin_2, cos_2, ...]``.
    beta_ : dict
        Regressor coefficients.
    sigma_ : float
        RMSE of the training residuals.
    """

    def __init__(self, n_changepoints=25, changepoint_range=0.8,
                 seasonalities=(WEEKLY, YEARLY), regressors=(),
                 trend_penalty=10.0, regressor_penalty=0.0):
        self.n_changepoints = n_changepoints
        self.changepoint_range = changepoint_range
        self.seasonalities = seasonalities
        self.regressors = regressors
        self.trend_penalty = trend_penalty
        self.regressor_penalty = regressor_penalty

    @classmethod
    def from_config(cls, cfg: AdditiveConfig) -> "AdditiveForecaster":
        return cls(**{k: getattr(cfg, k) for k in AdditiveForecaster._get_param_names()})

    @property
    def config(self) -> AdditiveConfig:
        return AdditiveConfig(**self.get_params())

    # design

    def _normalized_time(self, ts: np.ndarray) -> np.ndarray:
        return (np.asarray(ts, dtype=float) - self.t0_) / self.t_scale_

    def _design(self, X: TimeSeriesFrame) -> DesignMatrix:
        t = self._normalized_time(X.timestamps)
        hours = X.hours
        cols, names, pen, blocks = [], [], [], {}

        def add(block, block_names, penalty, key):
            start = len(names)
            cols.append(block)
            names.extend(block_names)
            pen.extend([penalty] * len(block_names))
            blocks[key] = slice(start, len(names))

        add(np.column_stack([np.ones_like(t), t]), ["intercept", "slope"], 0.0, "trend")
        if self.changepoints_.size:
            hinge = np.maximum(t[:, None] - self.changepoints_[None, :], 0.0)
            add(hinge, [f"delta_{j}" for j in range(self.changepoints_.size)],
                float(self.trend_penalty), "changepoints")
        for name, period, order in self.seasonalities_:
            fn = []
            for k in range(1, order + 1):
                fn += [f"{name}_sin{k}", f"{name}_cos{k}"]
            add(fourier_terms(hours, period, order), fn, 0.0, f"season:{name}")
        if self.regressors_:
            add(X.select(self.regressors_).values, [f"beta_{r}" for r in self.regressors_],
                float(self.regressor_penalty), "regressors")
        return DesignMatrix(np.column_stack(cols), names, np.asarray(pen), blocks)

    def build_design_matrix(self, X: TimeSeriesFrame) -> DesignMatrix:
        self._check_fitted()
        X = check_frame(X, required=self.regressors_)
        if len(X) == 0:
            raise InsufficientDataError("no rows to build a design matrix from")
        return self._design(X)

    def _set_layout(self, X: TimeSeriesFrame, warn: bool = True):
        validate_config(self)
        self.seasonalities_ = tuple((str(n), float(p), int(o)) for n, p, o in self.seasonalities)
        self.regressors_ = tuple(self.regressors)
        ts = X.timestamps
        self.t0_ = float(ts[0])
        span = float(ts[-1] - ts[0])
        self.t_scale_ = span if span > 0 else 1.0
        self.changepoints_ = np.linspace(0.0, self.changepoint_range,
                                         self.n_changepoints + 1)[1:]
        span_hours = span / HOUR
        for name, period, _ in self.seasonalities_:
            if warn and span_hours < 2 * period:
                warnings.warn(
                    f"training span of {span_hours:.0f} h covers fewer than two {name} "
                    f"periods; its Fourier terms are confounded with the trend",
                    ShortHistoryWarning, stacklevel=3)

    # fit / predict

    def fit(self, X: TimeSeriesFrame, y):
        """Fit on the rows of ``X`` (timestamps + regressor columns) against ``y``."""
        X = check_frame(X, required=self.regressors)
        y = check_vector(y, "y")
        if y.size != len(X):
            raise ValueError(f"y has {y.size} values for {len(X)} rows")
        if len(X) < 2:
            raise InsufficientDataError("need at least 2 training rows")
        self._set_layout(X)
        design = self._design(X)
        if len(X) <= design.matrix.shape[1]:
            raise InsufficientDataError(
                f"{len(X)} training rows for {design.matrix.shape[1]} design columns"
            )
        w, self.jittered_ = ridge_solve(design.matrix, y, design.penalty)
        self._unpack(w, design)
        resid = y - design.matrix @ w
        self.sigma_ = float(np.sqrt(np.mean(resid ** 2)))
        self.n_train_ = int(len(X))
        self.t_last_ = float(X.timestamps[-1])
        return self

    def _unpack(self, w: np.ndarray, design: DesignMatrix):
        self.coef_ = w
        self.column_names_ = list(design.names)
        b = design.blocks
        self.m_, self.k_ = float(w[0]), float(w[1])
        self.deltas_ = w[b["changepoints"]] if "changepoints" in b else np.zeros(0)
        self.seasonal_coefs_ = {n: w[b[f"season:{n}"]] for n, _, _ in self.seasonalities_}
        reg = w[b["regressors"]] if "regressors" in b else np.zeros(0)
        self.beta_ = dict(zip(self.regressors_, (float(v) for v in reg)))

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted")

    def trend(self, timestamps) -> np.ndarray:
        self._check_fitted()
        t = self._normalized_time(timestamps)
        g = self.m_ + self.k_ * t
        if self.changepoints_.size:
            g = g + np.maximum(t[:, None] - self.changepoints_[None, :], 0.0) @ self.deltas_
        return g

    def predict(self, X: TimeSeriesFrame) -> np.ndarray:
        """Forecast for the rows of ``X``; regressor columns must be present for every row."""
        self._check_fitted()
        X = check_frame(X, required=self.regressors_)
        if self.regressors_ and not np.all(np.isfinite(X.select(self.regressors_).values)):
            raise ValueError("missing regressor values in forecast rows")
        return self._design(X).matrix @ self.coef_

    def components(self, X: TimeSeriesFrame) -> dict:
        """Per-component contributions: trend, each seasonality, each regressor."""
        self._check_fitted()
        X = check_frame(X, required=self.regressors_)
        design = self._design(X)
        out = {"trend": self.trend(X.timestamps)}
        for name, _, _ in self.seasonalities_:
            sl = design.blocks[f"season:{name}"]
            out[name] = design.matrix[:, sl] @ self.coef_[sl]
        for r in self.regressors_:
            out[r] = self.beta_[r] * X[r]
        return out

    # serialization

    def to_dict(self) -> dict:
        self._check_fitted()
        return {
            "kind": "additive",
            "version": MODEL_VERSION,
            "config": {
                "n_changepoints": int(self.n_changepoints),
                "changepoint_range": float(self.changepoint_range),
                "seasonalities": [list(s) for s in self.seasonalities_],
                "regressors": list(self.regressors_),
                "trend_penalty": float(self.trend_penalty),
                "regressor_penalty": float(self.regressor_penalty),
            },
            "time": {"t0": self.t0_, "scale": self.t_scale_, "t_last": self.t_last_},
            "trend": {"k": self.k_, "m": self.m_,
                      "changepoints": self.changepoints_.tolist(),
                      "deltas": np.asarray(self.deltas_).tolist()},
            "seasonalities": {n: np.asarray(c).tolist() for n, c in self.seasonal_coefs_.items()},
            "regressors": {k: float(v) for k, v in self.beta_.items()},
            "sigma": self.sigma_,
            "coef": self.coef_.tolist(),
            "columns": self.column_names_,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AdditiveForecaster":
        if d.get("kind") != "additive":
            raise ValueError(f"not an additive model document: kind={d.get('kind')!r}")
        obj = cls(**{k: (tuple(tuple(s) for s in v) if k == "seasonalities" else
                         tuple(v) if k == "regressors" else v)
                     for k, v in d["config"].items()})
        obj._restore(d)
        return obj

    def _restore(self, d: dict):
        self.seasonalities_ = tuple((str(n), float(p), int(o)) for n, p, o in self.seasonalities)
        self.regressors_ = tuple(self.regressors)
        self.t0_ = float(d["time"]["t0"])
        self.t_scale_ = float(d["time"]["scale"])
        self.t_last_ = float(d["time"]["t_last"])
        self.changepoints_ = np.asarray(d["trend"]["changepoints"], dtype=float)
        coef = np.asarray(d["coef"], dtype=float)
        n_base = 2 + self.changepoints_.size + sum(2 * o for _, _, o in self.seasonalities_)
        design = DesignMatrix(np.zeros((0, coef.size)), list(d["columns"]), np.zeros(coef.size))
        pos = 2
        design.blocks["trend"] = slice(0, 2)
        if self.changepoints_.size:
            design.blocks["changepoints"] = slice(pos, pos + self.changepoints_.size)
            pos += self.changepoints_.size
        for n, _, o in self.seasonalities_:
            design.blocks[f"season:{n}"] = slice(pos, pos + 2 * o)
            pos += 2 * o
        if self.regressors_:
            design.blocks["regressors"] = slice(n_base, n_base + len(self.regressors_))
        self._unpack(coef, design)
        self.sigma_ = float(d["sigma"])
        self.jittered_ = False


def fit_additive(config: AdditiveConfig, frame: TimeSeriesFrame, target: str,
                 train: range) -> AdditiveForecaster:
    train = check_range(train, len(frame))
    rows = frame.rows(train)
    return AdditiveForecaster.from_config(config).fit(rows, rows[target])


def predict_additive(model: AdditiveForecaster, horizon: TimeSeriesFrame) -> np.ndarray:
    return model.predict(horizon)


def build_design_matrix(config: AdditiveConfig, rows: TimeSeriesFrame,
                        train_span: tuple | None = None) -> DesignMatrix:
    """Design matrix for ``rows`` with time normalized over ``train_span``
    (first, last epoch seconds); defaults to the span of ``rows`` itself."""
    check_frame(rows, required=config.regressors)
    if len(rows) == 0:
        raise InsufficientDataError("no rows to build a design matrix from")
    model = AdditiveForecaster.from_config(config)
    if train_span is None:
        model._set_layout(rows, warn=False)
    else:
        model._set_layout(TimeSeriesFrame(np.asarray(train_span), ["_"], np.zeros((2, 1))),
                          warn=False)
    return model._design(rows)
