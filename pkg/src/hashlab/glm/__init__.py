"""MAP generalized linear models for the measurement pipeline."""

from .dataset import Dataset, DatasetError, build_dataset, read_table
from .fit import (
    Family,
    FitError,
    GlmFit,
    MarginalEffects,
    fit_beta_regression,
    fit_gaussian,
    fit_hurdle_poisson,
    fit_logistic,
    log_mean_to_mean,
    marginal_effects,
    prediction_grid,
    smooth_proportions,
)

__all__ = [
    "Dataset",
    "DatasetError",
    "Family",
    "FitError",
    "GlmFit",
    "MarginalEffects",
    "build_dataset",
    "fit_beta_regression",
    "fit_gaussian",
    "fit_hurdle_poisson",
    "fit_logistic",
    "log_mean_to_mean",
    "marginal_effects",
    "prediction_grid",
    "read_table",
    "smooth_proportions",
]
