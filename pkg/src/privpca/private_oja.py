"""Private Oja's algorithm: clipped, noised per-sample updates after a shuffle,
plus the minibatch variant accounted by serial composition."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import InvalidInputError, OutOfRangeError
from .model import Dataset, ModelParams
from .oja import CHUNK, MAX_RESTARTS
from .privacy import PrivacyBudget, gaussian_sigma, shuffle_amplified_epsilon
from .rng import make_rng, uniform_sphere

logger = logging.getLogger(__name__)

C_CLIP = 1.0
C_NOISE = 1.0


@dataclass(frozen=True)
class ClipConfig:
    beta: float
    noise_multiplier: float

    def __post_init__(self):
        if not self.beta > 0:
            raise InvalidInputError("clipping threshold beta must be positive")
        if self.noise_multiplier < 0:
            raise InvalidInputError("noise multiplier must be non-negative")


@dataclass(frozen=True)
class PrivateOjaReport:
    clipped_steps: int
    regime_valid: bool
    noise_multiplier: float
    local_epsilon: float
    amplified_epsilon: float | None
    restarts: int = 0


def clip(x, beta: float) -> np.ndarray:
    """Rescale x to norm at most beta; identity inside the ball."""
    if not beta > 0:
        raise InvalidInputError("beta must be positive")
    x = np.asarray(x, dtype=np.float64)
    norm = float(np.linalg.norm(x))
    if norm <= beta:
        return x.copy()
    return x * (beta / norm)


def clip_rows(g: np.ndarray, beta: float) -> tuple[np.ndarray, int]:
    norms = np.linalg.norm(g, axis=1)
    over = norms > beta
    if not over.any():
        return g, 0
    g = g.copy()
    g[over] *= (beta / norms[over])[:, None]
    return g, int(over.sum())


def clipping_threshold(lambda1: float, d: int, K: float, gamma: float, n: int, zeta: float) -> float:
    """beta = C lambda_1 sqrt(d) (K gamma log^a(nd/zeta) + 1) with a = 1."""
    return clipping_threshold_a(lambda1, d, K, gamma, n, zeta, a=1.0)


def clipping_threshold_a(lambda1, d, K, gamma, n, zeta, a=1.0) -> float:
    if lambda1 <= 0 or d < 1 or K <= 0 or gamma < 0 or n < 1:
        raise InvalidInputError("clipping_threshold needs positive lambda1, d, K, n and gamma >= 0")
    if not 0 < zeta < 1:
        raise InvalidInputError("zeta must lie in (0, 1)")
    return C_CLIP * lambda1 * math.sqrt(d) * (K * gamma * math.log(n * d / zeta) ** a + 1.0)


def clipping_threshold_for(params: ModelParams, n: int, zeta: float = 0.01) -> float:
    return clipping_threshold_a(
        params.lambda1, params.dim, params.k_tail, params.gamma, n, zeta, params.a_tail
    )


def noise_multiplier(n: int, budget: PrivacyBudget) -> tuple[float, bool]:
    """alpha = C' log(n/delta) / (epsilon sqrt(n)) and whether epsilon is in the
    small regime epsilon <= sqrt(log(n/delta)/n) where shuffling amplification applies."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    log_term = math.log(n / budget.delta)
    alpha = C_NOISE * log_term / (budget.epsilon * math.sqrt(n))
    return alpha, budget.epsilon <= math.sqrt(log_term / n)


def shuffle_accounting(n: int, budget: PrivacyBudget, alpha: float) -> tuple[float, float | None, bool]:
    """Local epsilon of one step and the amplified central epsilon.

    Each step is a Gaussian mechanism with noise multiplier alpha at local
    delta_0 = delta / (e n); the amplified guarantee is evaluated at delta/2.
    Returns (eps0, eps_hat or None, valid).
    """
    if alpha <= 0:
        return math.inf, None, False
    delta0 = budget.delta / (math.e * n)
    eps0 = math.sqrt(2.0 * math.log(1.25 / delta0)) / alpha
    try:
        eps_hat = shuffle_amplified_epsilon(eps0, n, budget.delta / 2)
    except OutOfRangeError:
        return eps0, None, False
    return eps0, eps_hat, eps0 <= 0.5 and eps_hat <= budget.epsilon


def shuffle_order(n: int, seed: int) -> np.ndarray:
    """The permutation applied before the pass (Fisher-Yates)."""
    return make_rng(seed, "shuffle").permutation(n)


def run_private_oja(
    dataset: Dataset,
    budget: PrivacyBudget,
    schedule,
    clip_cfg: ClipConfig,
    seed: int,
    backend: str | None = None,
) -> tuple[np.ndarray, PrivateOjaReport]:
    """Shuffle, then w <- normalize(w + eta_t clip(A_t w) + 2 eta_t beta alpha z_t)."""
    n = len(dataset)
    if n < 1:
        raise InvalidInputError("empty dataset")
    kern = _backend.get_kernels(backend)
    shuffled = dataset.take(shuffle_order(n, seed))
    init_rng = make_rng(seed, "init")
    noise_rng = make_rng(seed, "noise")
    w = uniform_sphere(init_rng, dataset.dim)
    etas = np.ascontiguousarray(schedule.etas(n), dtype=np.float64)
    beta = float(clip_cfg.beta)
    coef = 2.0 * beta * clip_cfg.noise_multiplier
    data = shuffled.factors if shuffled.is_rank1 else shuffled.matrices
    work = () if shuffled.is_rank1 else (np.empty(dataset.dim),)
    step = kern.private_oja_rank1 if shuffled.is_rank1 else kern.private_oja_dense

    clipped = restarts = 0
    t = 0
    z = np.empty((0, dataset.dim))
    z_start = 0
    while t < n:
        stop = min(t + CHUNK, n)
        if t >= z_start + z.shape[0]:
            z_start = t
            z = noise_rng.standard_normal((stop - t, dataset.dim))
        zs = z[t - z_start : stop - z_start]
        failed, c = step(data[t:stop], etas[t:stop], w, beta, coef, zs, *work)
        clipped += c
        if failed < 0:
            t = stop
            continue
        restarts += 1
        if restarts > MAX_RESTARTS:
            raise RuntimeError(f"iterate collapsed to zero {restarts} times; the updates are degenerate")
        logger.warning("zero iterate at step %d; restarting from a fresh initial vector", t + failed + 1)
        w[:] = uniform_sphere(init_rng, dataset.dim)
        t += failed
    _, valid = noise_multiplier(n, budget)
    eps0, eps_hat, shuffle_ok = shuffle_accounting(n, budget, clip_cfg.noise_multiplier)
    report = PrivateOjaReport(
        clipped_steps=clipped,
        regime_valid=bool(valid and shuffle_ok),
        noise_multiplier=clip_cfg.noise_multiplier,
        local_epsilon=eps0,
        amplified_epsilon=eps_hat,
        restarts=restarts,
    )
    return w, report


def minibatch_noise_multiplier(T: int, budget: PrivacyBudget) -> float:
    """Noise multiplier making T Gaussian steps compose serially to ``budget``."""
    return gaussian_sigma(1.0, PrivacyBudget(budget.epsilon / T, budget.delta / T))


@dataclass(frozen=True)
class MinibatchReport:
    clipped: int
    batch_size: int
    steps: int
    noise_multiplier: float
    noise_std: list


def run_minibatch_clipped_oja(
    dataset: Dataset,
    budget: PrivacyBudget,
    T: int,
    schedule,
    clip_cfg: ClipConfig | float,
    seed: int,
    noise_multiplier: float | None = None,
    return_report: bool = False,
):
    """T steps of w <- normalize(w + (eta_t/B) sum clip(A_i w) + (2 eta_t beta alpha / B) z_t).

    ``clip_cfg`` may be a bare clipping threshold, in which case the noise
    multiplier is derived from serial composition over the T data accesses.
    """
    n = len(dataset)
    if T < 1 or T > n:
        raise InvalidInputError(f"need 1 <= T <= n, got T={T}, n={n}")
    B = n // T
    if isinstance(clip_cfg, ClipConfig):
        beta = clip_cfg.beta
        alpha = clip_cfg.noise_multiplier if noise_multiplier is None else noise_multiplier
    else:
        beta = float(clip_cfg)
        alpha = minibatch_noise_multiplier(T, budget) if noise_multiplier is None else noise_multiplier
    if not beta > 0:
        raise InvalidInputError("beta must be positive")
    w = uniform_sphere(make_rng(seed, "init"), dataset.dim)
    noise_rng = make_rng(seed, "noise")
    etas = schedule.etas(T)
    clipped = 0
    stds = []
    for t in range(T):
        g, c = clip_rows(dataset.gradients(w, t * B, (t + 1) * B), beta)
        clipped += c
        std = 2.0 * etas[t] * beta * alpha / B
        stds.append(std)
        w_new = w + etas[t] * g.mean(axis=0) + std * noise_rng.standard_normal(dataset.dim)
        nrm = np.linalg.norm(w_new)
        if nrm == 0.0:
            logger.warning("zero iterate at minibatch step %d; keeping previous iterate", t + 1)
            continue
        w = w_new / nrm
    if return_report:
        return w, MinibatchReport(clipped, B, T, alpha, stds)
    return w
