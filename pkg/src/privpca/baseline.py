"""Input-perturbation baseline: top eigenvector of the empirical covariance
plus a symmetric Gaussian noise matrix."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .metrics import top_eigpair
from .model import Dataset, ModelParams
from .privacy import PrivacyBudget
from .rng import make_rng


def default_norm_bound(params: ModelParams, n: int, zeta: float = 0.01) -> float:
    """beta = sqrt(lambda1 d log(n / zeta))."""
    return math.sqrt(params.lambda1 * params.dim * math.log(n / zeta))


def noise_entry_std(norm_bound: float, n: int, budget: PrivacyBudget) -> float:
    if budget.epsilon >= 1:
        raise InvalidInputError("the Gaussian mechanism calibration needs epsilon < 1")
    return norm_bound**2 / (n * budget.epsilon) * math.sqrt(2.0 * math.log(1.25 / budget.delta))


def symmetric_noise(rng: np.random.Generator, d: int, std: float) -> np.ndarray:
    """Upper triangle (with diagonal) i.i.d. N(0, std^2), mirrored below."""
    upper = np.triu(rng.standard_normal((d, d)) * std)
    return upper + np.triu(upper, 1).T


@dataclass(frozen=True)
class BaselineReport:
    projected: int
    noise_std: float
    norm_bound: float


def gaussian_mechanism_pca(
    dataset: Dataset,
    norm_bound: Optional[float],
    budget: PrivacyBudget,
    seed: int,
    params: Optional[ModelParams] = None,
    return_report: bool = False,
):
    n = len(dataset)
    if n == 0:
        raise InvalidInputError("empty dataset")
    if not dataset.is_rank1:
        raise InvalidInputError("the baseline needs samples of the form x x^T")
    if norm_bound is None:
        if params is None:
            raise InvalidInputError("give norm_bound or model params for the default bound")
        norm_bound = default_norm_bound(params, n)
    if not norm_bound > 0:
        raise InvalidInputError("norm_bound must be positive")
    x = np.array(dataset.factors, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    over = norms > norm_bound
    x[over] *= (norm_bound / norms[over])[:, None]
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / n
    std = noise_entry_std(norm_bound, n, budget)
    z = symmetric_noise(make_rng(seed, "baseline"), dataset.dim, std)
    _, v = top_eigpair(cov + z)
    if return_report:
        return v, BaselineReport(int(over.sum()), std, norm_bound)
    return v
