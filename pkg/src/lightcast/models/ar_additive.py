"""Additive model extended with linear autoregression on the target and
optional lagged regressors, forecast recursively."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import DegenerateDesignError, InsufficientDataError
from ..frame import TimeSeriesFrame
from ..validation import check_frame, check_range, check_vector
from ._linear import ridge_solve
from .additive import WEEKLY, YEARLY, AdditiveConfig, AdditiveForecaster, DesignMatrix


@dataclass(frozen=True)
class ARAdditiveConfig:
    base: AdditiveConfig = field(default_factory=AdditiveConfig)
    n_lags: int = 7
    regressor_lags: int = 0

    def __post_init__(self):
        if self.n_lags < 1:
            raise ValueError("n_lags must be >= 1")
        if self.regressor_lags < 0:
            raise ValueError("regressor_lags must be >= 0")


def lag_matrix(x: np.ndarray, n_lags: int) -> np.ndarray:
    """Column l-1 holds ``x[t - l]``; rows with unavailable lags are NaN."""
    out = np.full((x.size, n_lags), np.nan)
    for l in range(1, n_lags + 1):
        out[l:, l - 1] = x[:-l]
    return out


class ARAdditiveForecaster(AdditiveForecaster):
    """Additive forecaster with ``n_lags`` autoregressive terms.

    Trend, seasonality, contemporaneous regressors, target lags and lagged
    regressors are estimated jointly in one ridge solve; lag coefficients are
    unpenalized. Event effects are not modeled (always zero).

    Attributes
    ----------
    ar_coef_ : ndarray, shape (n_lags,)
        Weight on ``y[t-1], ..., y[t-n_lags]``.
    lagged_regressor_coef_ : dict
        regressor -> array of weights on lags ``1..regressor_lags``.
    history_ : ndarray
        Last ``n_lags`` training targets (default forecast origin).
    """

    def __init__(self, n_changepoints=25, changepoint_range=0.8,
                 seasonalities=(WEEKLY, YEARLY), regressors=(),
                 trend_penalty=10.0, regressor_penalty=0.0,
                 n_lags=7, regressor_lags=0):
        super().__init__(n_changepoints=n_changepoints, changepoint_range=changepoint_range,
                         seasonalities=seasonalities, regressors=regressors,
                         trend_penalty=trend_penalty, regressor_penalty=regressor_penalty)
        self.n_lags = n_lags
        self.regressor_lags = regressor_lags

    @classmethod
    def from_config(cls, cfg) -> "ARAdditiveForecaster":
        if isinstance(cfg, AdditiveConfig):
            return super().from_config(cfg)
        base = {k: getattr(cfg.base, k) for k in AdditiveForecaster._get_param_names()}
        return cls(**base, n_lags=cfg.n_lags, regressor_lags=cfg.regressor_lags)

    @property
    def config(self) -> ARAdditiveConfig:
        p = self.get_params()
        n_lags, reg_lags = p.pop("n_lags"), p.pop("regressor_lags")
        return ARAdditiveConfig(AdditiveConfig(**p), n_lags, reg_lags)

    def _lag_names(self):
        names = [f"ar_{l}" for l in range(1, self.n_lags + 1)]
        for r in self.regressors_:
            names += [f"{r}_lag{l}" for l in range(1, self.regressor_lags + 1)]
        return names

    def fit(self, X: TimeSeriesFrame, y):
        X = check_frame(X, required=self.regressors)
        y = check_vector(y, "y")
        if y.size != len(X):
            raise ValueError(f"y has {y.size} values for {len(X)} rows")
        if self.n_lags < 1:
            raise ValueError("n_lags must be >= 1")
        p = self.n_lags
        max_lag = max(p, self.regressor_lags)
        if len(X) <= max_lag + 2:
            raise InsufficientDataError(f"{len(X)} rows cannot support {max_lag} lags")
        self._set_layout(X)
        base = self._design(X)
        lag_cols = [lag_matrix(y, p)]
        for r in self.regressors_:
            if self.regressor_lags:
                lag_cols.append(lag_matrix(X[r], self.regressor_lags))
        L = np.column_stack(lag_cols)[max_lag:]
        if np.any(L.std(axis=0) == 0):
            raise DegenerateDesignError("constant lag column is collinear with the intercept")
        Z = np.column_stack([base.matrix[max_lag:], L])
        n_fit = Z.shape[0]
        if n_fit <= Z.shape[1]:
            raise InsufficientDataError(
                f"{n_fit} rows after lag trimming for {Z.shape[1]} design columns"
            )
        penalty = np.concatenate([base.penalty, np.zeros(L.shape[1])])
        w, self.jittered_ = ridge_solve(Z, y[max_lag:], penalty)
        nb = base.matrix.shape[1]
        self._unpack(w[:nb], base)
        self._set_lag_coefs(w[nb:])
        self.coef_full_ = w
        resid = y[max_lag:] - Z @ w
        self.sigma_ = float(np.sqrt(np.mean(resid ** 2)))
        self.n_train_ = int(len(X))
        self.t_last_ = float(X.timestamps[-1])
        self.history_ = y[-p:].copy()
        if self.regressor_lags:
            self.regressor_history_ = X.select(self.regressors_).values[-self.regressor_lags:].copy()
        return self

    def _set_lag_coefs(self, w_lags: np.ndarray):
        p, q = self.n_lags, self.regressor_lags
        self.ar_coef_ = np.asarray(w_lags[:p], dtype=float)
        self.lagged_regressor_coef_ = {
            r: np.asarray(w_lags[p + i * q: p + (i + 1) * q], dtype=float)
            for i, r in enumerate(self.regressors_)
        }

    def predict_additive_part(self, X: TimeSeriesFrame) -> np.ndarray:
        """Trend + seasonality + contemporaneous regressors, without AR terms."""
        return super().predict(X)

    def predict(self, X: TimeSeriesFrame, history=None, regressor_history=None) -> np.ndarray:
        """Recursive multi-step forecast over the rows of ``X``.

        Parameters
        ----------
        X : TimeSeriesFrame
            Horizon rows with regressor columns.
        history : array-like, optional
            The ``n_lags`` observed targets immediately preceding ``X``
            (oldest first). Defaults to the end of the training data.
        regressor_history : array-like, optional
            Shape (regressor_lags, n_regressors): regressor rows preceding
            ``X``. Needed only with lagged regressors.
        """
        self._check_fitted()
        base = self.predict_additive_part(X)
        p = self.n_lags
        hist = self.history_ if history is None else check_vector(history, "history")
        if hist.size < p:
            raise ValueError(f"history tail needs {p} values, got {hist.size}")
        buf = list(hist[-p:])
        reg_contrib = np.zeros(len(X))
        if self.regressor_lags and self.regressors_:
            q = self.regressor_lags
            rh = self.regressor_history_ if regressor_history is None else np.asarray(
                regressor_history, dtype=float).reshape(-1, len(self.regressors_))
            if rh.shape[0] < q:
                raise ValueError(f"regressor history needs {q} rows, got {rh.shape[0]}")
            R = np.vstack([rh[-q:], X.select(self.regressors_).values])
            for i, r in enumerate(self.regressors_):
                lags = lag_matrix(R[:, i], q)[q:]
                reg_contrib += lags @ self.lagged_regressor_coef_[r]
        phi = self.ar_coef_
        out = np.empty(len(X))
        for h in range(len(X)):
            lags = np.array(buf[::-1][:p])
            out[h] = base[h] + reg_contrib[h] + float(lags @ phi)
            buf.append(out[h])
        return out

    def predict_one_step(self, X: TimeSeriesFrame, y, history=None,
                         regressor_history=None) -> np.ndarray:
        """One-step-ahead predictions using the observed targets ``y`` as lags."""
        self._check_fitted()
        y = check_vector(y, "y")
        p = self.n_lags
        hist = self.history_ if history is None else check_vector(history, "history")
        full = np.concatenate([hist[-p:], y])
        lags = lag_matrix(full, p)[p:]
        out = self.predict_additive_part(X) + lags @ self.ar_coef_
        if self.regressor_lags and self.regressors_:
            q = self.regressor_lags
            rh = self.regressor_history_ if regressor_history is None else np.asarray(
                regressor_history, dtype=float).reshape(-1, len(self.regressors_))
            R = np.vstack([rh[-q:], X.select(self.regressors_).values])
            for i, r in enumerate(self.regressors_):
                out += lag_matrix(R[:, i], q)[q:] @ self.lagged_regressor_coef_[r]
        return out

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["kind"] = "ar_additive"
        d["config"]["n_lags"] = int(self.n_lags)
        d["config"]["regressor_lags"] = int(self.regressor_lags)
        d["ar"] = {
            "coef": self.ar_coef_.tolist(),
            "lagged_regressors": {k: v.tolist() for k, v in self.lagged_regressor_coef_.items()},
            "history": self.history_.tolist(),
            "regressor_history": (self.regressor_history_.tolist()
                                  if self.regressor_lags else []),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ARAdditiveForecaster":
        if d.get("kind") != "ar_additive":
            raise ValueError(f"not an AR additive model document: kind={d.get('kind')!r}")
        cfg = dict(d["config"])
        cfg["seasonalities"] = tuple(tuple(s) for s in cfg["seasonalities"])
        cfg["regressors"] = tuple(cfg["regressors"])
        obj = cls(**cfg)
        obj._restore(d)
        ar = d["ar"]
        w = list(ar["coef"])
        for r in obj.regressors_:
            w += list(ar["lagged_regressors"].get(r, []))
        obj._set_lag_coefs(np.asarray(w, dtype=float))
        obj.history_ = np.asarray(ar["history"], dtype=float)
        if obj.regressor_lags:
            obj.regressor_history_ = np.asarray(ar["regressor_history"], dtype=float)
        return obj


def fit_ar_additive(config: ARAdditiveConfig, frame: TimeSeriesFrame, target: str,
                    train: range) -> ARAdditiveForecaster:
    train = check_range(train, len(frame))
    rows = frame.rows(train)
    return ARAdditiveForecaster.from_config(config).fit(rows, rows[target])


def predict_ar_additive(model: ARAdditiveForecaster, horizon: TimeSeriesFrame,
                        history) -> np.ndarray:
    return model.predict(horizon, history=history)
