import json

import numpy as np
import pytest

from lightcast.exceptions import DegenerateDesignError, InsufficientDataError
from lightcast.frame import HOUR
from lightcast.metrics import rmse
from lightcast.models import (WEEKLY, AdditiveConfig, AdditiveForecaster, ARAdditiveConfig,
                              ARAdditiveForecaster, fit_ar_additive, predict_ar_additive)
from lightcast.models.ar_additive import lag_matrix

from conftest import make_frame

PLAIN = dict(n_changepoints=0, seasonalities=())


def ar1(n, phi, seed=0, sigma=1.0):
    rng = np.random.default_rng(seed)
    e = rng.normal(0, sigma, n)
    y = np.empty(n)
    y[0] = e[0]
    for t in range(1, n):
        y[t] = phi * y[t - 1] + e[t]
    return y


def frame_of(y, **cols):
    names = ["y", *cols]
    return make_frame(names, t0=0, values=np.column_stack([y, *cols.values()]))


def as_plain_additive(m: ARAdditiveForecaster) -> AdditiveForecaster:
    d = m.to_dict()
    d["kind"] = "additive"
    for k in ("n_lags", "regressor_lags"):
        d["config"].pop(k)
    return AdditiveForecaster.from_dict(d)


class TestConfig:
    def test_defaults(self):
        c = ARAdditiveConfig()
        assert c.n_lags == 7 and c.regressor_lags == 0
        assert c.base == AdditiveConfig()

    def test_invalid(self):
        with pytest.raises(ValueError):
            ARAdditiveConfig(n_lags=0)
        with pytest.raises(ValueError):
            ARAdditiveConfig(regressor_lags=-1)

    def test_lag_matrix(self):
        L = lag_matrix(np.arange(5.0), 2)
        np.testing.assert_array_equal(L[2:], [[1, 0], [2, 1], [3, 2]])
        assert np.isnan(L[0]).all() and np.isnan(L[1, 1])


class TestFit:
    def test_ar1_recovery(self):
        y = ar1(5000, 0.8, seed=1)
        cfg = ARAdditiveConfig(AdditiveConfig(**PLAIN), n_lags=7)
        m = fit_ar_additive(cfg, frame_of(y), "y", range(0, 5000))
        assert m.ar_coef_.size == 7
        assert m.ar_coef_[0] == pytest.approx(0.8, abs=0.05)
        assert np.all(np.abs(m.ar_coef_[1:]) < 0.05)

    def test_constant_series_degenerate(self):
        cfg = ARAdditiveConfig(AdditiveConfig(**PLAIN), n_lags=1)
        with pytest.raises(DegenerateDesignError):
            fit_ar_additive(cfg, frame_of(np.full(100, 4.0)), "y", range(0, 100))

    def test_seasonal_white_noise_has_no_ar(self):
        rng = np.random.default_rng(2)
        h = np.arange(5000.0)
        y = 10 * np.sin(2 * np.pi * h / 168) + 3 * np.cos(4 * np.pi * h / 168) + rng.normal(size=h.size)
        cfg = ARAdditiveConfig(AdditiveConfig(n_changepoints=0, seasonalities=(WEEKLY,)), n_lags=7)
        m = fit_ar_additive(cfg, frame_of(y), "y", range(0, 5000))
        assert np.all(np.abs(m.ar_coef_) < 0.05)

    def test_insufficient_rows(self):
        with pytest.raises(InsufficientDataError):
            ARAdditiveForecaster(**PLAIN, n_lags=7).fit(frame_of(np.arange(8.0)), np.arange(8.0))

    def test_rmse_not_worse_than_nested_additive(self):
        rng = np.random.default_rng(3)
        n = 2000
        h = np.arange(n, dtype=float)
        r = rng.normal(size=n)
        y = 4 * np.sin(2 * np.pi * h / 168) + 2 * r + ar1(n, 0.6, seed=4)
        f = frame_of(y, r=r)
        base = dict(n_changepoints=5, seasonalities=(WEEKLY,), regressors=("r",))
        ar = ARAdditiveForecaster(**base, n_lags=3).fit(f, y)
        nested = AdditiveForecaster(**base).fit(f, y)
        rows = f.rows(slice(3, None))
        one_step = ar.predict_one_step(rows, y[3:], history=y[:3])
        assert rmse(y[3:], one_step) <= rmse(y[3:], nested.predict(rows)) + 1e-12
        assert ar.sigma_ == pytest.approx(rmse(y[3:], one_step), rel=1e-9)


@pytest.fixture(scope="module")
def model():
    y = ar1(3000, 0.8, seed=5)
    m = ARAdditiveForecaster(**PLAIN, n_lags=1).fit(frame_of(y), y)
    return m, y


class TestPredict:
    def test_horizon_one_equals_one_step(self, model):
        m, y = model
        fut = make_frame(["y"], t0=3000 * HOUR, values=[0.0])
        hist = y[-1:]
        rec = m.predict(fut, history=hist)
        one = m.predict_one_step(fut, [0.0], history=hist)
        assert rec[0] == one[0]

    def test_closed_form_decay(self, model):
        m, y = model
        m0 = ARAdditiveForecaster.from_dict(m.to_dict())
        m0.coef_ = np.zeros_like(m0.coef_)
        phi = m0.ar_coef_[0]
        fut = make_frame(["y"], t0=3000 * HOUR, values=np.zeros(168))
        y0 = 7.5
        path = predict_ar_additive(m0, fut, history=[y0])
        np.testing.assert_allclose(path, phi ** np.arange(1, 169) * y0, rtol=0, atol=1e-10)

    def test_zero_ar_equals_additive(self):
        rng = np.random.default_rng(6)
        h = np.arange(1500.0)
        r = rng.normal(size=h.size)
        y = 3 * np.sin(2 * np.pi * h / 168) + r + rng.normal(size=h.size)
        f = frame_of(y, r=r)
        m = ARAdditiveForecaster(n_changepoints=3, seasonalities=(WEEKLY,), regressors=("r",),
                                 n_lags=4).fit(f, y)
        m.ar_coef_ = np.zeros(4)
        fut = f.rows(slice(1300, 1468))
        np.testing.assert_array_equal(m.predict(fut, history=y[1296:1300]),
                                      as_plain_additive(m).predict(fut))

    def test_short_history(self):
        m2 = ARAdditiveForecaster(**PLAIN, n_lags=3).fit(frame_of(ar1(200, 0.5)), ar1(200, 0.5))
        with pytest.raises(ValueError):
            m2.predict(make_frame(["y"], t0=200 * HOUR, values=np.zeros(5)), history=[1.0])

    def test_recursion_deterministic(self, model):
        m, y = model
        fut = make_frame(["y"], t0=3000 * HOUR, values=np.zeros(168))
        a = m.predict(fut, history=y[-1:])
        b = m.predict(fut, history=y[-1:])
        assert np.array_equal(a, b)


class TestLaggedRegressors:
    def test_lagged_regressor_recovery_and_round_trip(self):
        rng = np.random.default_rng(8)
        n = 4000
        r = rng.normal(size=n)
        y = np.zeros(n)
        e = rng.normal(0, 0.3, n)
        for t in range(2, n):
            y[t] = 0.5 * y[t - 1] + 1.0 * r[t] + 0.7 * r[t - 1] - 0.4 * r[t - 2] + e[t]
        f = frame_of(y, r=r)
        m = ARAdditiveForecaster(**PLAIN, regressors=("r",), n_lags=1, regressor_lags=2).fit(f, y)
        assert m.ar_coef_[0] == pytest.approx(0.5, abs=0.05)
        assert m.beta_["r"] == pytest.approx(1.0, abs=0.05)
        np.testing.assert_allclose(m.lagged_regressor_coef_["r"], [0.7, -0.4], atol=0.05)
        doc = json.loads(json.dumps(m.to_dict()))
        assert doc["kind"] == "ar_additive" and doc["ar"]["coef"] == m.ar_coef_.tolist()
        again = ARAdditiveForecaster.from_dict(doc)
        fut = make_frame(["y", "r"], t0=n * HOUR,
                         values=np.column_stack([np.zeros(24), rng.normal(size=24)]))
        np.testing.assert_array_equal(again.predict(fut), m.predict(fut))
