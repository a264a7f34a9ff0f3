"""Differentially private streaming PCA."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .baseline import gaussian_mechanism_pca
from .dppca import DpPcaConfig, dppca_learning_rate, run_dppca, tune_learning_rate
from .errors import EstimationFailedError, InsufficientSamplesError, InvalidInputError, OutOfRangeError
from .estimators import private_mean, private_top_eigenvalue
from .metrics import sin_distance, top_eigpair
from .model import (
    Dataset,
    ModelParams,
    SampleMatrix,
    gaussian_model_params,
    make_neighboring,
    sample_gaussian_dataset,
    sample_toy_dataset,
    spiked_sigma,
    toy_model_params,
)
from .oja import InverseTimeSchedule, LearningRateSchedule, practical_schedule, run_oja, theory_schedule
from .private_oja import ClipConfig, clip, clipping_threshold, run_minibatch_clipped_oja, run_private_oja
from .privacy import (
    PrivacyBudget,
    advanced_composition_split,
    gaussian_sigma,
    parallel_compose,
    serial_compose,
    shuffle_amplified_epsilon,
    stable_histogram,
)

__all__ = [
    "BACKEND",
    "ClipConfig",
    "Dataset",
    "DpPcaConfig",
    "EstimationFailedError",
    "InsufficientSamplesError",
    "InvalidInputError",
    "InverseTimeSchedule",
    "LearningRateSchedule",
    "ModelParams",
    "OutOfRangeError",
    "PrivacyBudget",
    "SampleMatrix",
    "advanced_composition_split",
    "clip",
    "clipping_threshold",
    "dppca_learning_rate",
    "gaussian_mechanism_pca",
    "gaussian_model_params",
    "gaussian_sigma",
    "make_neighboring",
    "parallel_compose",
    "practical_schedule",
    "private_mean",
    "private_top_eigenvalue",
    "run_dppca",
    "run_minibatch_clipped_oja",
    "run_oja",
    "run_private_oja",
    "sample_gaussian_dataset",
    "sample_toy_dataset",
    "serial_compose",
    "shuffle_amplified_epsilon",
    "sin_distance",
    "spiked_sigma",
    "stable_histogram",
    "theory_schedule",
    "tune_learning_rate",
    "top_eigpair",
    "toy_model_params",
]
