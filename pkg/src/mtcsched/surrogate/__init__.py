"""Learned performance model used to pick protocol parameters."""

from .dataset import DEFAULT_GRID, LABEL_NAMES, Dataset, ScenarioSampler, generate_dataset
from .encoding import ProfileEncoding, RangeError, encode_profile, feature_row
from .network import (
    Adam,
    DegenerateError,
    MinMax,
    Model,
    RegressorSpec,
    ShapeError,
    ZScore,
    forward,
    gradient_check,
    init_params,
    r_squared,
    r_squared_conventional,
    train,
    zscore_fit_apply,
)
from .select import NoFeasibleCandidate, select_params

__all__ = [
    "DEFAULT_GRID", "LABEL_NAMES", "Dataset", "ScenarioSampler", "generate_dataset",
    "ProfileEncoding", "RangeError", "encode_profile", "feature_row",
    "Adam", "DegenerateError", "MinMax", "Model", "RegressorSpec", "ShapeError", "ZScore",
    "forward", "gradient_check", "init_params", "r_squared", "r_squared_conventional",
    "train", "zscore_fit_apply", "NoFeasibleCandidate", "select_params",
]
