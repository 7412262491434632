"""Regressors: standardized ridge with penalty selection, gradient-boosted
regression trees with ordered target encoding, and the lag baseline."""

from .base import SchemaMismatchError, TrainParams, conform_table, predict
from .boosting import (
    EncodingTable,
    GbdtModel,
    Tree,
    fit_gbdt,
    ordered_target_encode,
)
from .linear import (
    RidgeModel,
    Standardization,
    fit_lag_baseline,
    fit_ridge_cv,
    fit_standardization,
    standardize_fit_apply,
)
from .persist import load_model, save_model

__all__ = [
    "EncodingTable",
    "GbdtModel",
    "RidgeModel",
    "SchemaMismatchError",
    "Standardization",
    "TrainParams",
    "Tree",
    "conform_table",
    "fit_gbdt",
    "fit_lag_baseline",
    "fit_ridge_cv",
    "fit_standardization",
    "load_model",
    "ordered_target_encode",
    "predict",
    "save_model",
    "standardize_fit_apply",
]
