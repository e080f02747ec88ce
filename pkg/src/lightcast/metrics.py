"""Forecast error metrics on raw target units."""

from __future__ import annotations

import numpy as np

from .exceptions import ZeroVarianceError
from .validation import check_pair


def mae(y, yhat) -> float:
    y, yhat = check_pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def rmse(y, yhat) -> float:
    y, yhat = check_pair(y, yhat)
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def r_squared(y, yhat) -> float:
    y, yhat = check_pair(y, yhat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        raise ZeroVarianceError("R^2 is undefined for a constant target")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def score_all(y, yhat) -> dict:
    """MAE, RMSE and (when defined) R^2 as a dict; R^2 is None for constant ``y``."""
    y, yhat = check_pair(y, yhat)
    try:
        r2 = r_squared(y, yhat)
    except ZeroVarianceError:
        r2 = None
    return {"mae": mae(y, yhat), "rmse": rmse(y, yhat), "r2": r2, "n": int(y.size)}
