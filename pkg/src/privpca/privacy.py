"""Privacy mechanisms and (epsilon, delta) budget arithmetic."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, OutOfRangeError
from .rng import make_rng

# Constant in front of the O(.) shuffle-amplification bound.
C_SHUFFLE = 1.0


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidInputError(f"epsilon must be positive, not {self.epsilon}")
        if not 0 < self.delta < 1:
            raise InvalidInputError(f"delta must lie in (0, 1), not {self.delta}")

    def scaled(self, factor_eps: float, factor_delta: float | None = None) -> "PrivacyBudget":
        if factor_delta is None:
            factor_delta = factor_eps
        return PrivacyBudget(self.epsilon * factor_eps, self.delta * factor_delta)

    def halved(self) -> "PrivacyBudget":
        return PrivacyBudget(self.epsilon / 2, self.delta / 2)


def gaussian_sigma(sensitivity: float, budget: PrivacyBudget) -> float:
    """Noise standard deviation of the Gaussian mechanism.

    Only valid for epsilon in (0, 1); callers splitting a larger budget must
    do so before calling.
    """
    if sensitivity < 0:
        raise InvalidInputError("sensitivity must be non-negative")
    if budget.epsilon >= 1:
        raise OutOfRangeError(f"Gaussian mechanism requires epsilon < 1, got {budget.epsilon}")
    return sensitivity * math.sqrt(2.0 * math.log(1.25 / budget.delta)) / budget.epsilon


def serial_compose(budgets: Sequence[PrivacyBudget]) -> PrivacyBudget:
    if not budgets:
        raise InvalidInputError("nothing to compose")
    return PrivacyBudget(math.fsum(b.epsilon for b in budgets), math.fsum(b.delta for b in budgets))


def parallel_compose(budgets: Sequence[PrivacyBudget]) -> PrivacyBudget:
    """Budget of mechanisms applied to disjoint parts of the data."""
    if not budgets:
        raise InvalidInputError("nothing to compose")
    return PrivacyBudget(max(b.epsilon for b in budgets), max(b.delta for b in budgets))


def advanced_composition_split(total: PrivacyBudget, k: int) -> PrivacyBudget:
    """Per-query budget such that k adaptive queries compose to ``total``."""
    if total.epsilon > 0.9:
        raise OutOfRangeError(f"advanced composition requires epsilon <= 0.9, got {total.epsilon}")
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    eps = total.epsilon / (2.0 * math.sqrt(2.0 * k * math.log(2.0 / total.delta)))
    return PrivacyBudget(eps, total.delta / (2 * k))


def advanced_composition_total(per_query: PrivacyBudget, k: int) -> PrivacyBudget:
    """Inverse of :func:`advanced_composition_split`."""
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    delta = 2 * k * per_query.delta
    return PrivacyBudget(2.0 * per_query.epsilon * math.sqrt(2.0 * k * math.log(2.0 / delta)), delta)


def shuffle_amplified_epsilon(eps0: float, n: int, delta: float) -> float:
    """Central epsilon after shuffling n outputs of eps0-DP local randomizers."""
    if eps0 < 0 or n < 1 or not 0 < delta < 1:
        raise InvalidInputError("need eps0 >= 0, n >= 1 and delta in (0, 1)")
    limit = n / (16.0 * math.log(2.0 / delta))
    if limit <= 1.0 or eps0 > math.log(limit):
        raise OutOfRangeError(
            f"shuffling bound needs eps0 <= ln(n / (16 ln(2/delta))); eps0={eps0}, n={n}"
        )
    e0 = math.exp(eps0)
    return C_SHUFFLE * (-math.expm1(-eps0)) * (math.sqrt(e0 * math.log(1.0 / delta) / n) + e0 / n)


# --------------------------------------------------------------------------
# Stability-based histogram
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HistogramOutcome:
    """Noisy masses of the bins that survived thresholding."""

    counts: Mapping[int, float] = field(default_factory=dict)
    bin_width: str = "custom"

    def __len__(self) -> int:
        return len(self.counts)

    def argmax(self) -> int | None:
        """Bin with the largest released mass, ties broken toward the smaller id."""
        if not self.counts:
            return None
        best = max(self.counts.values())
        return min(k for k, p in self.counts.items() if p == best)


def histogram_counts(values: Iterable[int], n_total: int) -> dict[int, float]:
    """Pre-noise empirical masses of the occupied bins."""
    if isinstance(values, np.ndarray):
        keys, counts = np.unique(values.astype(np.int64), return_counts=True)
        return {int(k): int(c) / n_total for k, c in zip(keys, counts)}
    return {int(k): c / n_total for k, c in Counter(int(v) for v in values).items()}


def laplace(rng: np.random.Generator, scale: float, size) -> np.ndarray:
    """Laplace draws by inverse CDF from a uniform on (-1/2, 1/2]."""
    u = 0.5 - rng.random(size)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def histogram_threshold(n_total: int, budget: PrivacyBudget) -> float:
    return 2.0 / (budget.epsilon * n_total) * math.log(2.0 / budget.delta) + 1.0 / n_total


def stable_histogram(
    values: Sequence[int],
    n_total: int,
    budget: PrivacyBudget,
    seed: int,
    bin_width: str = "custom",
) -> HistogramOutcome:
    """(epsilon, delta)-DP histogram over an unbounded family of bins.

    Only occupied bins receive Laplace noise; bins whose noisy mass falls
    below the threshold are dropped, so unoccupied bins are never released.
    """
    if n_total < 1:
        raise InvalidInputError("n_total must be >= 1")
    if budget.delta >= 1.0 / n_total:
        raise InvalidInputError(f"delta must be < 1/n_total = {1.0 / n_total}")
    exact = histogram_counts(values, n_total)
    if not exact:
        return HistogramOutcome({}, bin_width)
    bins = sorted(exact)
    noise = laplace(make_rng(seed, "histogram"), 2.0 / (budget.epsilon * n_total), len(bins))
    threshold = histogram_threshold(n_total, budget)
    released = {}
    for k, z in zip(bins, noise):
        p = exact[k] + float(z)
        if p >= threshold:
            released[k] = min(p, 1.0)
    return HistogramOutcome(released, bin_width)
