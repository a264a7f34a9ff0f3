"""Non-private Oja's algorithm and its step-size schedules."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import InvalidInputError
from .model import Dataset, ModelParams
from .rng import make_rng, uniform_sphere

logger = logging.getLogger(__name__)

DEFAULT_ZETA = 0.01
CHUNK = 8192
MAX_RESTARTS = 16


@dataclass(frozen=True)
class LearningRateSchedule:
    """eta_t = alpha / (gap * (xi + t)), t = 1, 2, ..."""

    alpha: float
    xi: float
    gap: float

    def __post_init__(self):
        if not self.alpha > 0.5:
            raise InvalidInputError(f"alpha must exceed 1/2, got {self.alpha}")
        if not self.xi >= 0:
            raise InvalidInputError("xi must be non-negative")
        if not (self.gap > 0 and math.isfinite(self.gap)):
            raise InvalidInputError("gap must be positive and finite")

    def eta(self, t: int) -> float:
        return self.alpha / (self.gap * (self.xi + t))

    def etas(self, n: int, start: int = 1) -> np.ndarray:
        t = np.arange(start, start + n, dtype=np.float64)
        return self.alpha / (self.gap * (self.xi + t))


@dataclass(frozen=True)
class InverseTimeSchedule:
    """eta_t = c1 / (c2 + t): the two-constant family searched by the tuner."""

    c1: float
    c2: float

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0:
            raise InvalidInputError("c1 and c2 must be non-negative")

    def eta(self, t: int) -> float:
        return self.c1 / (self.c2 + t)

    def etas(self, n: int, start: int = 1) -> np.ndarray:
        t = np.arange(start, start + n, dtype=np.float64)
        return self.c1 / (self.c2 + t)


def default_alpha(n: int, c: float = 1.0) -> float:
    """alpha = c log n (at least slightly above 1/2)."""
    return max(c * math.log(max(n, 2)), 0.51)


def oja_xi(params: ModelParams, alpha: float, zeta: float = DEFAULT_ZETA) -> float:
    """Offset xi = 20 max(kappa M alpha, kappa^2 (V+1) alpha^2 / log(1 + zeta/100))."""
    if not alpha > 0.5:
        raise InvalidInputError("alpha must exceed 1/2")
    if not 0 < zeta < 1:
        raise InvalidInputError("zeta must lie in (0, 1)")
    kappa = params.kappa
    if math.isinf(kappa):
        raise InvalidInputError("no spectral gap: kappa is infinite")
    return xi_value(kappa, params.m_bound, params.v_bound, alpha, math.log1p(zeta / 100.0))


def xi_value(kappa: float, m_bound: float, v_bound: float, alpha: float, log_term: float) -> float:
    """The offset formula itself, with log(1 + zeta/100) passed in directly."""
    return 20.0 * max(kappa * m_bound * alpha, kappa**2 * (v_bound + 1.0) * alpha**2 / log_term)


def theory_schedule(params: ModelParams, n: int, zeta: float = DEFAULT_ZETA, c: float = 1.0) -> LearningRateSchedule:
    """Schedule with alpha = c log n and the worst-case offset from :func:`oja_xi`."""
    alpha = default_alpha(n, c)
    return LearningRateSchedule(alpha=alpha, xi=oja_xi(params, alpha, zeta), gap=params.gap)


def practical_schedule(params: ModelParams, n: int, c: float = 1.0) -> LearningRateSchedule:
    """alpha = c log n with no offset.

    The worst-case offset divides by log(1 + zeta/100) and is in the tens of
    millions at moderate d, which freezes the iterate for any feasible n.
    """
    return LearningRateSchedule(alpha=default_alpha(n, c), xi=0.0, gap=params.gap)


def _run_kernel(step, dataset: Dataset, etas: np.ndarray, w: np.ndarray, rng, extra=()):
    """Drive a per-sample kernel over ``dataset``; restart on a zero iterate."""
    n = len(dataset)
    data = dataset.factors if dataset.is_rank1 else dataset.matrices
    work = () if dataset.is_rank1 else (np.empty(dataset.dim),)
    t = restarts = 0
    while t < n:
        stop = min(t + CHUNK, n)
        failed = step(data[t:stop], etas[t:stop], w, *extra, *work)
        if failed < 0:
            t = stop
            continue
        restarts += 1
        if restarts > MAX_RESTARTS:
            raise RuntimeError(f"iterate collapsed to zero {restarts} times; the updates are degenerate")
        logger.warning("zero iterate at step %d; restarting from a fresh initial vector", t + failed + 1)
        w[:] = uniform_sphere(rng, dataset.dim)
        t += failed
    return w


def run_oja(dataset: Dataset, schedule, seed: int, backend: str | None = None) -> np.ndarray:
    """Single pass of w <- normalize(w + eta_t A_t w) from a uniform random start."""
    n = len(dataset)
    if n < 1:
        raise InvalidInputError("empty dataset")
    kern = _backend.get_kernels(backend)
    rng = make_rng(seed, "init")
    w = uniform_sphere(rng, dataset.dim)
    etas = np.ascontiguousarray(schedule.etas(n), dtype=np.float64)
    step = kern.oja_rank1 if dataset.is_rank1 else kern.oja_dense
    return _run_kernel(step, dataset, etas, w, rng)
