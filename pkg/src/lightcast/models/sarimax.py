"""Seasonal ARMA with exogenous regressors, estimated in two stages.

Stage one regresses the target on ``[1, X]`` by ordinary least squares.
Stage two fits the multiplicative ARMA(p,q)x(P,Q)_s model to the stage-one
residuals by minimizing the conditional sum of squared innovations (CSS)
with a Nelder-Mead simplex over tanh-transformed coefficients, so each
coefficient stays inside (-1, 1).

Error recursion with residual ``u`` and innovation ``e``::

    (1 - phi B)(1 - Phi B^s) u_t = (1 + theta B)(1 + Theta B^s) e_t
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal
from sklearn.base import BaseEstimator, RegressorMixin

from ..exceptions import ConvergenceWarning, InsufficientDataError, NotFittedError
from ..frame import TimeSeriesFrame
from ..validation import check_frame, check_range, check_vector

MODEL_VERSION = 1
COEF_NAMES = ("phi", "theta", "seasonal_phi", "seasonal_theta")


@dataclass(frozen=True)
class SarimaxOrder:
    p: int = 1
    d: int = 0
    q: int = 1
    P: int = 1
    D: int = 0
    Q: int = 1
    s: int = 24

    def __post_init__(self):
        for name in ("p", "q", "P", "Q"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"order {name} must be 0 or 1, got {getattr(self, name)}")
        if self.d or self.D:
            raise ValueError("differencing (d, D > 0) is not supported")
        if self.s < 1:
            raise ValueError("seasonal period s must be >= 1")

    @property
    def active(self) -> tuple:
        """Which of (phi, theta, seasonal_phi, seasonal_theta) are estimated."""
        return (bool(self.p), bool(self.q), bool(self.P), bool(self.Q))


def _ar_poly(phi, Phi, s):
    a = np.zeros(s + 2)
    a[0] = 1.0
    a[1] -= phi
    a[s] -= Phi
    a[s + 1] += phi * Phi
    return a


def _ma_poly(theta, Theta, s):
    b = np.zeros(s + 2)
    b[0] = 1.0
    b[1] += theta
    b[s] += Theta
    b[s + 1] += theta * Theta
    return b


def innovations(u: np.ndarray, coefs, s: int) -> np.ndarray:
    """Conditional innovations: zero for the first ``s + 1`` points, then the
    exact multiplicative recursion."""
    phi, theta, Phi, Theta = coefs
    e = np.zeros_like(u)
    if u.size <= s + 1:
        return e
    w = signal.lfilter(_ar_poly(phi, Phi, s), [1.0], u)[s + 1:]
    e[s + 1:] = signal.lfilter([1.0], _ma_poly(theta, Theta, s), w)
    return e


def css(u: np.ndarray, coefs, s: int) -> float:
    e = innovations(u, coefs, s)
    return float(np.dot(e[s + 1:], e[s + 1:]))


class SarimaxForecaster(RegressorMixin, BaseEstimator):
    """Regression with multiplicative seasonal ARMA errors.

    Parameters
    ----------
    order : tuple (p, d, q)
    seasonal_order : tuple (P, D, Q, s)
    exog : sequence of str
        Exogenous columns of ``X``; pass them pre-scaled.
    maxiter : int
        Nelder-Mead iteration cap.
    tol : float
        Relative objective-spread tolerance for convergence.
    """

    def __init__(self, order=(1, 0, 1), seasonal_order=(1, 0, 1, 24), exog=(),
                 maxiter=2000, tol=1e-10):
        self.order = order
        self.seasonal_order = seasonal_order
        self.exog = exog
        self.maxiter = maxiter
        self.tol = tol

    @property
    def sarimax_order(self) -> SarimaxOrder:
        p, d, q = self.order
        P, D, Q, s = self.seasonal_order
        return SarimaxOrder(p, d, q, P, D, Q, s)

    def _regression(self, X: TimeSeriesFrame) -> np.ndarray:
        if not self.exog_:
            return np.full(len(X), self.const_)
        return self.const_ + X.select(self.exog_).values @ self.beta_

    def fit(self, X: TimeSeriesFrame, y):
        order = self.sarimax_order
        X = check_frame(X, required=self.exog)
        y = check_vector(y, "y")
        if y.size != len(X):
            raise ValueError(f"y has {y.size} values for {len(X)} rows")
        s = order.s
        if y.size < 10 * s:
            raise InsufficientDataError(f"need at least {10 * s} rows for s={s}, got {y.size}")
        self.exog_ = tuple(self.exog)
        self.order_ = order
        design = np.column_stack([np.ones(y.size)] + ([X.select(self.exog_).values]
                                                      if self.exog_ else []))
        w, *_ = np.linalg.lstsq(design, y, rcond=None)
        self.const_ = float(w[0])
        self.beta_ = np.asarray(w[1:], dtype=float)
        u = y - design @ w

        active = np.array(order.active)

        def unpack(z):
            coefs = np.zeros(4)
            coefs[active] = np.tanh(z)
            return coefs

        def objective(z):
            return css(u, unpack(z), s)

        k = int(active.sum())
        self.css_start_ = css(u, np.zeros(4), s)
        if k:
            z0 = np.zeros(k)
            simplex = np.vstack([z0, z0 + 0.1 * np.eye(k)])
            fatol = self.tol * max(self.css_start_, np.finfo(float).tiny)
            res = optimize.minimize(
                objective, z0, method="Nelder-Mead",
                options={"maxiter": self.maxiter, "xatol": 1e-8, "fatol": fatol,
                         "initial_simplex": simplex},
            )
            z = res.x if res.fun <= self.css_start_ else z0
            self.converged_ = bool(res.success)
            self.n_iter_ = int(res.nit)
            if not res.success:
                warnings.warn(f"CSS optimizer did not converge: {res.message}",
                              ConvergenceWarning, stacklevel=2)
        else:
            z = np.zeros(0)
            self.converged_ = True
            self.n_iter_ = 0
        coefs = unpack(z)
        self.phi_, self.theta_, self.seasonal_phi_, self.seasonal_theta_ = map(float, coefs)
        e = innovations(u, coefs, s)
        n_eff = y.size - s - 1
        self.css_ = float(np.dot(e[s + 1:], e[s + 1:]))
        self.sigma2_ = self.css_ / n_eff
        self.resid_tail_ = u[-(s + 1):].copy()
        self.innov_tail_ = e[-(s + 1):].copy()
        self.fitted_ = y - e
        return self

    @property
    def coefs_(self) -> np.ndarray:
        return np.array([self.phi_, self.theta_, self.seasonal_phi_, self.seasonal_theta_])

    def _check_fitted(self):
        if not hasattr(self, "phi_"):
            raise NotFittedError("SarimaxForecaster is not fitted")

    def _step(self, u_hist, e_hist):
        """Residual prediction for the next step given histories (latest last)."""
        s = self.order_.s
        phi, theta, Phi, Theta = self.coefs_
        return (phi * u_hist[-1] + Phi * u_hist[-s] - phi * Phi * u_hist[-s - 1]
                + theta * e_hist[-1] + Theta * e_hist[-s] + theta * Theta * e_hist[-s - 1])

    def update(self, X: TimeSeriesFrame, y):
        """Filter observed rows that follow the current state, advancing the
        residual and innovation tails without refitting any coefficient.

        Returns the one-step-ahead predictions for those rows.
        """
        self._check_fitted()
        X = check_frame(X, required=self.exog_)
        y = check_vector(y, "y")
        u = y - self._regression(X)
        s = self.order_.s
        u_hist = list(self.resid_tail_)
        e_hist = list(self.innov_tail_)
        preds = np.empty(y.size)
        for i in range(y.size):
            u_pred = self._step(u_hist, e_hist)
            preds[i] = u_pred
            u_hist.append(u[i])
            e_hist.append(u[i] - u_pred)
        self.resid_tail_ = np.asarray(u_hist[-(s + 1):])
        self.innov_tail_ = np.asarray(e_hist[-(s + 1):])
        return preds + self._regression(X)

    def predict(self, X: TimeSeriesFrame) -> np.ndarray:
        """Multi-step forecast for ``len(X)`` steps after the current state.

        Future innovations are zero; forecasts replace unknown residual lags.
        """
        self._check_fitted()
        X = check_frame(X, required=self.exog_)
        if len(X) < 1:
            raise ValueError("horizon must be >= 1")
        if self.exog_ and not np.all(np.isfinite(X.select(self.exog_).values)):
            raise ValueError("missing exogenous values in forecast rows")
        u_hist = list(self.resid_tail_)
        e_hist = list(self.innov_tail_)
        out = np.empty(len(X))
        for h in range(len(X)):
            u_pred = self._step(u_hist, e_hist)
            out[h] = u_pred
            u_hist.append(u_pred)
            e_hist.append(0.0)
        return out + self._regression(X)

    def to_dict(self) -> dict:
        self._check_fitted()
        o = self.order_
        return {
            "kind": "sarimax",
            "version": MODEL_VERSION,
            "order": [o.p, o.d, o.q],
            "seasonal_order": [o.P, o.D, o.Q, o.s],
            "exog": list(self.exog_),
            "const": self.const_,
            "beta": self.beta_.tolist(),
            "coefs": dict(zip(COEF_NAMES, self.coefs_.tolist())),
            "sigma2": self.sigma2_,
            "css": self.css_,
            "converged": self.converged_,
            "resid_tail": self.resid_tail_.tolist(),
            "innov_tail": self.innov_tail_.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SarimaxForecaster":
        if d.get("kind") != "sarimax":
            raise ValueError(f"not a SARIMAX model document: kind={d.get('kind')!r}")
        obj = cls(order=tuple(d["order"]), seasonal_order=tuple(d["seasonal_order"]),
                  exog=tuple(d["exog"]))
        obj.order_ = obj.sarimax_order
        obj.exog_ = tuple(d["exog"])
        obj.const_ = float(d["const"])
        obj.beta_ = np.asarray(d["beta"], dtype=float)
        c = d["coefs"]
        obj.phi_, obj.theta_ = float(c["phi"]), float(c["theta"])
        obj.seasonal_phi_, obj.seasonal_theta_ = float(c["seasonal_phi"]), float(c["seasonal_theta"])
        obj.sigma2_ = float(d["sigma2"])
        obj.css_ = float(d["css"])
        obj.converged_ = bool(d["converged"])
        obj.resid_tail_ = np.asarray(d["resid_tail"], dtype=float)
        obj.innov_tail_ = np.asarray(d["innov_tail"], dtype=float)
        return obj


def fit_sarimax(order: SarimaxOrder, frame: TimeSeriesFrame, target: str, exog,
                train: range) -> SarimaxForecaster:
    train = check_range(train, len(frame))
    rows = frame.rows(train)
    model = SarimaxForecaster(order=(order.p, order.d, order.q),
                              seasonal_order=(order.P, order.D, order.Q, order.s),
                              exog=tuple(exog))
    return model.fit(rows, rows[target])


def forecast_sarimax(model: SarimaxForecaster, horizon: int,
                     future_exog: TimeSeriesFrame | None = None) -> np.ndarray:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if future_exog is None:
        if model.exog_:
            raise ValueError("future exogenous rows are required")
        future_exog = TimeSeriesFrame(np.arange(horizon) * 3600, [], np.zeros((horizon, 0)))
    if len(future_exog) < horizon:
        raise ValueError(f"{len(future_exog)} exogenous rows for horizon {horizon}")
    return model.predict(future_exog.rows(slice(0, horizon)))
