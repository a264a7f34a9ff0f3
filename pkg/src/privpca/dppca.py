"""DP-PCA: minibatch Oja updates whose mean gradient is estimated privately.

Each batch is split in two disjoint halves.  The first half privately
estimates the top eigenvalue of the gradient covariance, the second half
privately estimates the mean gradient with noise scaled by that estimate.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EstimationFailedError, InvalidInputError
from .estimators import private_mean, private_top_eigenvalue
from .metrics import sin_distance
from .model import Dataset, ModelParams
from .oja import InverseTimeSchedule
from .privacy import PrivacyBudget, gaussian_sigma, parallel_compose, serial_compose
from .rng import derive_seed, make_rng, uniform_sphere

logger = logging.getLogger(__name__)

LAMBDA_FLOOR = 1e-12
C2 = 1.0
C3 = 1.0


def default_batch_size(n: int, c1: float = 1.0) -> int:
    """B = c1 n / (log n)^2, at least 4."""
    return max(int(c1 * n / math.log(n) ** 2), 4)


@dataclass(frozen=True)
class DpPcaConfig:
    budget: PrivacyBudget
    batch_size: int
    zeta: float
    schedule: object
    K: float
    a: float
    seed: int

    def __post_init__(self):
        if self.batch_size < 4:
            raise InvalidInputError("batch_size must be >= 4")
        if not 0 < self.zeta < 1:
            raise InvalidInputError("zeta must lie in (0, 1)")
        if self.K <= 0 or self.a <= 0:
            raise InvalidInputError("K and a must be positive")

    def n_steps(self, n: int) -> int:
        return n // self.batch_size


@dataclass
class PrivacyLedger:
    """Budget bookkeeping of one run; each entry names the data it touched."""

    entries: list = field(default_factory=list)

    def charge(self, name: str, budget: PrivacyBudget, part: str) -> None:
        self.entries.append((name, budget, part))

    def per_part(self) -> dict[str, PrivacyBudget]:
        parts: dict[str, list] = {}
        for _, budget, part in self.entries:
            parts.setdefault(part, []).append(budget)
        return {p: serial_compose(bs) for p, bs in parts.items()}

    def parallel_total(self) -> PrivacyBudget:
        """Guarantee if every part is disjoint from every other."""
        return parallel_compose(list(self.per_part().values()))

    def serial_total(self) -> PrivacyBudget:
        """Guarantee treating all mechanisms as touching the same records."""
        by_kind: dict[str, PrivacyBudget] = {}
        for name, budget, _ in self.entries:
            prev = by_kind.get(name)
            by_kind[name] = budget if prev is None else parallel_compose([prev, budget])
        return serial_compose(list(by_kind.values()))

    def reported(self) -> PrivacyBudget:
        return self.serial_total()


@dataclass
class DpPcaReport:
    lambda_hats: list
    truncations: list
    skipped_steps: list
    ledger: PrivacyLedger
    batch_size: int
    steps: int
    floored_steps: list = field(default_factory=list)
    regime_valid: Optional[bool] = None

    @property
    def n_skipped(self) -> int:
        return len(self.skipped_steps)

    @property
    def lambda_hat_mean(self) -> float:
        vals = [x for x in self.lambda_hats if x is not None]
        return float(np.mean(vals)) if vals else float("nan")


def run_dppca(dataset: Dataset, cfg: DpPcaConfig, params: Optional[ModelParams] = None) -> tuple[np.ndarray, DpPcaReport]:
    n = len(dataset)
    B = cfg.batch_size
    if n < B:
        raise InvalidInputError(f"need n >= batch size ({n} < {B})")
    T = n // B
    half = B // 2
    sub_budget = cfg.budget.halved()
    sub_zeta = cfg.zeta / (2 * T)
    w = uniform_sphere(make_rng(cfg.seed, "init"), dataset.dim)
    etas = cfg.schedule.etas(T)
    ledger = PrivacyLedger()
    report = DpPcaReport([], [], [], ledger, B, T)
    for t in range(T):
        start = t * B
        ledger.charge("eigenvalue", sub_budget, f"batch{t}:first")
        ledger.charge("mean", sub_budget, f"batch{t}:second")
        est = private_top_eigenvalue(
            dataset.gradients(w, start, start + half),
            sub_budget,
            sub_zeta,
            derive_seed(cfg.seed, "eigen", t),
        )
        if est.is_bottom:
            report.lambda_hats.append(None)
            report.truncations.append(0)
            report.skipped_steps.append(t + 1)
            continue
        lam = est.value
        if lam < LAMBDA_FLOOR:
            lam = LAMBDA_FLOOR
            report.floored_steps.append(t + 1)
        report.lambda_hats.append(est.value)
        try:
            mean = private_mean(
                dataset.gradients(w, start + half, start + 2 * half),
                sub_budget,
                sub_zeta,
                2.0 * lam,
                cfg.K,
                cfg.a,
                derive_seed(cfg.seed, "mean", t),
            )
        except EstimationFailedError:
            report.truncations.append(0)
            report.skipped_steps.append(t + 1)
            continue
        report.truncations.append(mean.truncated)
        w_new = w + etas[t] * mean.value
        nrm = np.linalg.norm(w_new)
        if nrm == 0.0:
            report.skipped_steps.append(t + 1)
            continue
        w = w_new / nrm
    if params is not None:
        report.regime_valid = sample_regime_valid(params, n, cfg.budget)
    return w, report


def sample_regime_valid(params: ModelParams, n: int, budget: PrivacyBudget) -> bool:
    """Whether n clears the sample-size requirement with unit constants."""
    kappa = params.kappa
    if math.isinf(kappa):
        return False
    eps, delta, d = budget.epsilon, budget.delta, params.dim
    log_d = math.log(1.0 / delta)
    try:
        growth = math.exp(kappa**2)
    except OverflowError:
        return False
    need = (
        growth
        + math.sqrt(d) * log_d**1.5 / eps
        + kappa * params.m_bound
        + kappa**2 * params.v_bound
        + d * kappa * params.gamma * math.sqrt(log_d) / eps
    )
    return n >= need and delta <= 1.0 / n


# --------------------------------------------------------------------------
# Learning rate
# --------------------------------------------------------------------------


def dppca_noise_scale(params: ModelParams, budget: PrivacyBudget, batch_size: int, zeta: float) -> float:
    """Upper bound on the per-step noise multiplier of the private mean gradient."""
    d = params.dim
    return (
        16.0
        * params.k_tail
        * params.gamma
        * params.lambda1
        * math.log(batch_size * d / zeta) ** params.a_tail
        * math.sqrt(2.0 * d * math.log(2.5 / budget.delta))
        / (budget.epsilon * batch_size)
    )


def dppca_xi(params: ModelParams, noise_scale: float, alpha: float, zeta: float, batch_size: int, n_steps: int) -> float:
    gap = params.gap
    if not gap > 0:
        raise InvalidInputError("spectral gap must be positive")
    d, lam1 = params.dim, params.lambda1
    V, M = params.v_bound, params.m_bound
    log_dt = math.log(d * n_steps / zeta)
    v_eff = V * lam1**2 / batch_size + noise_scale**2 * C2 * d
    m_eff = C3 * (
        M * lam1 * log_dt / batch_size
        + math.sqrt(V * lam1**2 * log_dt / batch_size)
        + noise_scale * (math.sqrt(d) + math.sqrt(math.log(n_steps / zeta)))
    )
    return 20.0 * max(m_eff * alpha / gap, (v_eff + lam1**2) * alpha**2 / (gap**2 * math.log1p(zeta / 100.0)))


def learning_rate(t: int, alpha: float, gap: float, xi: float) -> float:
    if not gap > 0:
        raise InvalidInputError("spectral gap must be positive")
    return alpha / (gap * (xi + t))


def dppca_learning_rate(
    t: int,
    params: ModelParams,
    noise_scale: float,
    alpha: float,
    zeta: float,
    batch_size: int,
    n_steps: int,
) -> float:
    xi = dppca_xi(params, noise_scale, alpha, zeta, batch_size, n_steps)
    return learning_rate(t, alpha, params.gap, xi)


# --------------------------------------------------------------------------
# Learning-rate search
# --------------------------------------------------------------------------


def round_budget(total: PrivacyBudget, i: int) -> PrivacyBudget:
    """Budget charged in round i: (eps, delta) / (2^(i+1) (2i - 1))."""
    f = 1.0 / (2 ** (i + 1) * (2 * i - 1))
    return PrivacyBudget(total.epsilon * f, total.delta * f)


def round_candidates(i: int) -> list[tuple[float, float]]:
    """Boundary of the doubling grid {2^-(i-1), ..., 2^(i-1)}^2 at round i."""
    grid = [2.0**j for j in range(-i + 1, i)]
    edge = sorted({2.0 ** (i - 1), 2.0 ** (-i + 1)})
    out = []
    for c1 in edge:
        for c2 in grid:
            out.append((c1, c2))
    for c1 in grid:
        for c2 in edge:
            out.append((c1, c2))
    return sorted(set(out))


def private_sin_error(
    dataset: Dataset, w: np.ndarray, params: ModelParams, budget: PrivacyBudget, zeta: float, seed: int
) -> float:
    """Private estimate of sin(w, v1) from the Rayleigh quotient w^T A w.

    Uses sin^2 = (lambda1 - w^T Sigma w) / (lambda1 - lambda2) for a
    spectrum with lambda2 = ... = lambda_d, clipped to [0, 1].
    """
    n = len(dataset)
    q = np.einsum("ij,ij->i", dataset.gradients(w), np.broadcast_to(w, (n, dataset.dim)))
    bound = params.lambda1 * (1.0 + params.k_tail * params.gamma * math.log(n / zeta) ** params.a_tail) ** 2
    q = np.clip(q, -bound, bound)
    std = gaussian_sigma(2.0 * bound / n, budget)
    q_hat = float(q.mean()) + std * make_rng(seed, "evaluate").standard_normal()
    s2 = (params.lambda1 - q_hat) / params.gap
    return float(math.sqrt(min(max(s2, 0.0), 1.0)))


@dataclass
class TuneResult:
    c1: float
    c2: float
    w: np.ndarray
    error: float
    converged: bool
    rounds: int
    round_budgets: list


def tune_learning_rate(
    dataset: Dataset,
    cfg_base: DpPcaConfig,
    target_error: float,
    true_v1=None,
    params: Optional[ModelParams] = None,
    max_rounds: int = 6,
) -> TuneResult:
    """Search eta_t = c1 / (c2 + t) over a doubling grid until the error target is met.

    Every candidate of round i runs DP-PCA and its private evaluation at
    :func:`round_budget` (total, i).
    """
    if not 0 < target_error < 1:
        raise InvalidInputError("target_error must lie in (0, 1)")
    if true_v1 is None and params is None:
        raise InvalidInputError("private evaluation needs model params (lambda1, lambda2)")
    best = None
    budgets = []
    for i in range(1, max_rounds + 1):
        rb = round_budget(cfg_base.budget, i)
        budgets.append(rb)
        for c1, c2 in round_candidates(i):
            cfg = DpPcaConfig(
                budget=rb,
                batch_size=cfg_base.batch_size,
                zeta=cfg_base.zeta,
                schedule=InverseTimeSchedule(c1, c2),
                K=cfg_base.K,
                a=cfg_base.a,
                seed=derive_seed(cfg_base.seed, "tune", i, repr((c1, c2))),
            )
            w, _ = run_dppca(dataset, cfg)
            if true_v1 is not None:
                err = sin_distance(w, true_v1)
            else:
                err = private_sin_error(dataset, w, params, rb, cfg_base.zeta, cfg.seed)
            if best is None or err < best.error:
                best = TuneResult(c1, c2, w, err, False, i, budgets)
        if best.error <= target_error:
            best.converged = True
            best.rounds = i
            best.round_budgets = list(budgets)
            return best
    best.rounds = max_rounds
    best.round_budgets = list(budgets)
    return best
