"""Private top-eigenvalue and private mean estimation of a batch of gradients.

Both estimators adapt their noise to the spread of the gradients rather than
to a worst-case norm bound: the eigenvalue estimator finds the scale of the
gradient covariance, and the mean estimator uses that scale to choose
histogram bins and a truncation window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EstimationFailedError, InsufficientSamplesError, InvalidInputError, OutOfRangeError
from .metrics import top_eigenvalues
from .privacy import (
    PrivacyBudget,
    advanced_composition_split,
    gaussian_sigma,
    histogram_counts,
    stable_histogram,
)
from .rng import derive_seed, make_rng

# Multiplier of log(1/(delta zeta))/epsilon in the number of subsets.  The
# stability histogram suppresses every bin unless epsilon * k exceeds about
# 2 log(2/delta) / (largest bin mass), so a unit constant can never release.
C_SUBSETS = 8.0

# Reserved bin id for an exactly zero eigenvalue; below every geometric bin.
ZERO_BIN = -(1 << 62)

_QUARTER_EDGES = (2.0 ** -0.25, 2.0 ** -0.5, 2.0 ** -0.75)


def geometric_bin(value: float) -> int:
    """Index i with 2^(i/4) <= value < 2^((i+1)/4); ZERO_BIN for value <= 0.

    Uses the binary exponent so that scaling by a power of two shifts the
    index by an exact multiple of 4.
    """
    if not value > 0:
        return ZERO_BIN
    m, e = math.frexp(value)  # value = m 2^e, m in [0.5, 1)
    # floor(4 log2 m) in {-4, -3, -2, -1}
    if m >= _QUARTER_EDGES[0]:
        q = -1
    elif m >= _QUARTER_EDGES[1]:
        q = -2
    elif m >= _QUARTER_EDGES[2]:
        q = -3
    else:
        q = -4
    return 4 * e + q


def geometric_edge(index: int) -> float:
    if index == ZERO_BIN:
        return 0.0
    e, q = divmod(index, 4)
    return math.ldexp(2.0 ** (q / 4.0), e)


def n_subsets(budget: PrivacyBudget, zeta: float, n_pairs: int) -> int:
    k = math.ceil(C_SUBSETS * math.log(1.0 / (budget.delta * zeta)) / budget.epsilon)
    return int(min(max(k, 1), max(n_pairs, 1)))


@dataclass(frozen=True)
class EigenEstimate:
    """Released eigenvalue scale; ``value is None`` marks the bottom outcome."""

    value: Optional[float]
    bin_index: Optional[int] = None
    n_subsets: int = 0
    subset_size: int = 0

    @property
    def is_bottom(self) -> bool:
        return self.value is None


def subset_top_eigenvalues(diffs: np.ndarray, k: int) -> np.ndarray:
    """Top eigenvalue of (1/b) G_j G_j^T for k contiguous subsets of size b."""
    m, d = diffs.shape
    b = m // k
    g = diffs[: k * b].reshape(k, b, d)
    if b < d:
        gram = np.einsum("kid,kjd->kij", g, g) / b
    else:
        gram = np.einsum("kid,kie->kde", g, g) / b
    return np.maximum(top_eigenvalues(gram), 0.0)


def private_top_eigenvalue(
    gradients,
    budget: PrivacyBudget,
    zeta: float,
    seed: int,
    k: Optional[int] = None,
) -> EigenEstimate:
    """(epsilon, delta)-DP estimate of the top eigenvalue of the covariance of
    pairwise gradient differences, returned as a geometric bin lower edge."""
    g = np.asarray(gradients, dtype=np.float64)
    if g.ndim != 2:
        raise InvalidInputError("gradients must be a (B, d) array")
    if not 0 < zeta < 1:
        raise InvalidInputError("zeta must lie in (0, 1)")
    n_pairs = g.shape[0] // 2
    if k is None:
        k = n_subsets(budget, zeta, n_pairs)
    if k < 1 or n_pairs < k:
        raise InsufficientSamplesError(f"need at least 2k = {2 * k} gradients, got {g.shape[0]}")
    diffs = g[1 : 2 * n_pairs : 2] - g[0 : 2 * n_pairs : 2]
    lambdas = subset_top_eigenvalues(diffs, k)
    bins = np.array([geometric_bin(float(x)) for x in lambdas], dtype=np.int64)
    hist = stable_histogram(bins, k, budget, seed, bin_width="geometric 2^(1/4)")
    best = hist.argmax()
    b = n_pairs // k
    if best is None:
        return EigenEstimate(None, None, k, b)
    return EigenEstimate(geometric_edge(best), best, k, b)


# --------------------------------------------------------------------------
# Mean estimation
# --------------------------------------------------------------------------


def histogram_budget(budget: PrivacyBudget, d: int) -> PrivacyBudget:
    """Per-coordinate histogram budget (eps / (4 sqrt(2d log(4/delta))), delta / (4d))."""
    return advanced_composition_split(budget.halved(), d)


def mean_noise_std(budget: PrivacyBudget, B: int, d: int, lambda_hat: float, K: float, a: float, zeta: float) -> float:
    """Gaussian noise level 12 K sqrt(Lambda) log^a(Bd/zeta) sqrt(2d log(2.5/delta)) / (eps B)."""
    radius = truncation_radius(lambda_hat, K, a, B, d, zeta)
    sensitivity = math.sqrt(d) * 2.0 * radius / B
    return gaussian_sigma(sensitivity, budget.halved())


def truncation_radius(lambda_hat: float, K: float, a: float, B: int, d: int, zeta: float) -> float:
    return 3.0 * K * math.sqrt(lambda_hat) * math.log(B * d / zeta) ** a


def bin_width(lambda_hat: float, K: float, a: float) -> float:
    return 2.0 ** 0.25 * K * math.sqrt(lambda_hat) * math.log(25.0) ** a


@dataclass(frozen=True)
class TruncationBox:
    center: np.ndarray
    half_width: float

    def __post_init__(self):
        if not self.half_width > 0:
            raise InvalidInputError("half_width must be positive")


@dataclass(frozen=True)
class MeanEstimate:
    value: np.ndarray
    truncated: int
    box: TruncationBox
    noise_std: float
    histogram_budget: PrivacyBudget
    gaussian_budget: PrivacyBudget


def linear_bins(values: np.ndarray, tau: float) -> np.ndarray:
    """Bin ids of the half-open bins (l tau, (l+1) tau]."""
    return (np.ceil(values / tau) - 1).astype(np.int64)


def private_mean(
    gradients,
    budget: PrivacyBudget,
    zeta: float,
    lambda_hat: float,
    K: float,
    a: float,
    seed: int,
) -> MeanEstimate:
    """(epsilon, delta)-DP mean of B gradients whose covariance scale is ~lambda_hat.

    Half the budget locates each coordinate with a stability histogram
    (advanced composition over d coordinates); the other half pays for the
    Gaussian noise on the truncated mean.
    """
    g = np.asarray(gradients, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 1:
        raise InvalidInputError("gradients must be a non-empty (B, d) array")
    if not lambda_hat > 0:
        raise InvalidInputError("lambda_hat must be positive")
    if budget.epsilon >= 0.9:
        raise OutOfRangeError(f"private_mean requires epsilon < 0.9, got {budget.epsilon}")
    if not 0 < zeta < 1:
        raise InvalidInputError("zeta must lie in (0, 1)")
    B, d = g.shape
    hist_budget = histogram_budget(budget, d)
    tau = bin_width(lambda_hat, K, a)
    radius = truncation_radius(lambda_hat, K, a, B, d, zeta)
    center = np.empty(d)
    for j in range(d):
        bins = linear_bins(g[:, j], tau)
        hist = stable_histogram(bins, B, hist_budget, derive_seed(seed, "coordinate", j), bin_width=f"linear {tau:.6g}")
        best = hist.argmax()
        if best is None:
            raise EstimationFailedError(f"every histogram bin of coordinate {j} was suppressed")
        center[j] = best * tau
    lo = center - radius
    hi = center + radius
    clipped = np.clip(g, lo, hi)
    truncated = int(np.count_nonzero(clipped != g))
    std = mean_noise_std(budget, B, d, lambda_hat, K, a, zeta)
    noise = make_rng(seed, "mean-noise").standard_normal(d) * std
    return MeanEstimate(
        value=clipped.mean(axis=0) + noise,
        truncated=truncated,
        box=TruncationBox(center, radius),
        noise_std=std,
        histogram_budget=hist_budget,
        gaussian_budget=budget.halved(),
    )


def pre_noise_histograms(gradients, tau: float) -> list[dict[int, float]]:
    """Deterministic per-coordinate histogram masses (for audits and tests)."""
    g = np.asarray(gradients, dtype=np.float64)
    return [histogram_counts(linear_bins(g[:, j], tau), g.shape[0]) for j in range(g.shape[1])]
