from .additive import (WEEKLY, YEARLY, AdditiveConfig, AdditiveForecaster, build_design_matrix,
                       fit_additive, predict_additive)
from .ar_additive import (ARAdditiveConfig, ARAdditiveForecaster, fit_ar_additive,
                          predict_ar_additive)
from .gbt import (GbtConfig, GBTForecaster, GBTRegressor, build_tabular_features, fit_gbt,
                  predict_gbt)
from .sarimax import SarimaxForecaster, SarimaxOrder, fit_sarimax, forecast_sarimax

__all__ = [
    "WEEKLY", "YEARLY", "AdditiveConfig", "AdditiveForecaster", "build_design_matrix",
    "fit_additive", "predict_additive",
    "ARAdditiveConfig", "ARAdditiveForecaster", "fit_ar_additive", "predict_ar_additive",
    "GbtConfig", "GBTForecaster", "GBTRegressor", "build_tabular_features", "fit_gbt",
    "predict_gbt",
    "SarimaxForecaster", "SarimaxOrder", "fit_sarimax", "forecast_sarimax",
]
