"""Leakage-safe hourly air-quality forecasting toolkit."""

from .exceptions import LightcastError
from .featsel import MRMRSelector, correlation_matrix, mrmr_select, mutual_information, pearson
from .frame import (SplitIndices, TimeSeriesFrame, chronological_split, enforce_hourly_grid,
                    zscore_filter)
from .metrics import mae, r_squared, rmse
from .models import (AdditiveForecaster, ARAdditiveForecaster, GBTForecaster, GBTRegressor,
                     SarimaxForecaster)
from .preprocessing import TrainScaler, scaler_fit, scaler_transform

__version__ = "0.1.0"

__all__ = [
    "LightcastError", "MRMRSelector", "correlation_matrix", "mrmr_select", "mutual_information",
    "pearson", "SplitIndices", "TimeSeriesFrame", "chronological_split", "enforce_hourly_grid",
    "zscore_filter", "mae", "r_squared", "rmse", "AdditiveForecaster", "ARAdditiveForecaster",
    "GBTForecaster", "GBTRegressor", "SarimaxForecaster", "TrainScaler", "scaler_fit",
    "scaler_transform",
]
