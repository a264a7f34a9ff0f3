"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines, or
``python tests/test_acceptance.py`` for the summary alone.
"""
import math
import time

import numpy as np
import pytest

from privpca.baseline import gaussian_mechanism_pca
from privpca.dppca import DpPcaConfig, default_batch_size, round_budget, run_dppca
from privpca.estimators import histogram_budget, private_mean, private_top_eigenvalue
from privpca.metrics import sin_distance
from privpca.model import (
    GAUSSIAN_A,
    GAUSSIAN_K,
    gaussian_model_params,
    sample_gaussian_dataset,
    sample_toy_dataset,
    spiked_sigma,
    toy_model_params,
)
from privpca.oja import practical_schedule, run_oja
from privpca.privacy import (
    PrivacyBudget,
    advanced_composition_total,
    histogram_counts,
    serial_compose,
    stable_histogram,
)
from privpca.private_oja import (
    ClipConfig,
    clipping_threshold_for,
    noise_multiplier,
    run_minibatch_clipped_oja,
    run_private_oja,
)
from privpca.rng import make_rng, uniform_sphere


def report(num, ok, detail, seconds, limit):
    within = seconds <= limit
    status = "PASS" if ok and within else "FAIL"
    print(f"criterion {num}: {status}  {detail}  ({seconds:.1f}s, limit {limit}s)")
    return ok and within


# ------------------------------------------------------------------ 1


def criterion_1():
    sigma = spiked_sigma(20, 1.0, 0.5)
    v1 = np.eye(20)[0]
    ns = [2000, 8000, 32000]
    meds = []
    for n in ns:
        sched = practical_schedule(gaussian_model_params(sigma, n), n)
        errs = [sin_distance(run_oja(sample_gaussian_dataset(sigma, n, s), sched, s), v1) for s in range(20)]
        meds.append(float(np.median(errs)))
    slope = float(np.polyfit(np.log(ns), np.log(meds), 1)[0])
    return -0.7 <= slope <= -0.3, f"oja slope {slope:.3f} (medians {', '.join(f'{m:.4f}' for m in meds)})"


# ------------------------------------------------------------------ 2


def criterion_2():
    d, n = 10, 10_000
    sigma = spiked_sigma(d)
    p = gaussian_model_params(sigma, n)
    budget = PrivacyBudget(0.89, 1e-5)
    alpha, _ = noise_multiplier(n, budget)
    cfg = ClipConfig(clipping_threshold_for(p, n, 0.01), alpha)
    sched = practical_schedule(p, n)
    clean = 0
    for s in range(40):
        _, rep = run_private_oja(sample_gaussian_dataset(sigma, n, s), budget, sched, cfg, s)
        clean += rep.clipped_steps == 0
    return clean >= 38, f"{clean}/40 runs without clipping"


# ------------------------------------------------------------------ 3


def criterion_3():
    d, n, T = 10, 100_000, 4
    v = np.eye(d)[0]
    budget = PrivacyBudget(0.89, 1e-5)
    med = {"dppca": {}, "minibatch": {}}
    for s2 in (0.1, 0.01):
        p = toy_model_params(v, s2, n)
        sched = practical_schedule(p, n)
        beta = clipping_threshold_for(p, n)
        dp, mb = [], []
        for s in range(20):
            ds = sample_toy_dataset(v, s2, n, s)
            cfg = DpPcaConfig(budget, n // T, 0.01, sched, p.k_tail, p.a_tail, s)
            dp.append(sin_distance(run_dppca(ds, cfg)[0], v))
            mb.append(sin_distance(run_minibatch_clipped_oja(ds, budget, T, sched, beta, s), v))
        med["dppca"][s2] = float(np.median(dp))
        med["minibatch"][s2] = float(np.median(mb))
    r_dp = med["dppca"][0.01] / med["dppca"][0.1]
    r_mb = med["minibatch"][0.01] / med["minibatch"][0.1]
    detail = (
        f"dppca ratio {r_dp:.3f} (need <= 0.5; {med['dppca'][0.1]:.3f} -> {med['dppca'][0.01]:.3f}), "
        f"minibatch oja ratio {r_mb:.3f} (need >= 0.5; {med['minibatch'][0.1]:.3f} -> {med['minibatch'][0.01]:.3f})"
    )
    return r_dp <= 0.5 and r_mb >= 0.5, detail


# ------------------------------------------------------------------ 4


def criterion_4():
    budget = PrivacyBudget(1.0, 1e-6)
    hits = 0
    for s in range(50):
        g = np.random.default_rng(s).standard_normal((40_000, 2)) * 2.0
        est = private_top_eigenvalue(g, budget, 0.05, seed=s)
        hits += (not est.is_bottom) and 4.0 <= est.value <= 16.0
    return hits >= 45, f"{hits}/50 estimates within a factor 2 of 8"


# ------------------------------------------------------------------ 5


def criterion_5():
    d, B = 5, 5000
    budget = PrivacyBudget(0.89, 1e-5)
    clean = 0
    for s in range(100):
        g = np.random.default_rng(s).standard_normal((B, d))
        clean += private_mean(g, budget, 0.01, 1.0, GAUSSIAN_K, GAUSSIAN_A, seed=s).truncated == 0
    dev = np.zeros(d)
    std = None
    for s in range(500):
        g = np.random.default_rng(10_000 + s).standard_normal((B, d))
        est = private_mean(g, budget, 0.01, 1.0, GAUSSIAN_K, GAUSSIAN_A, seed=10_000 + s)
        dev += est.value - g.mean(axis=0)
        std = est.noise_std
    dev_norm = float(np.linalg.norm(dev / 500))
    bound = 3 * std * math.sqrt(d) / math.sqrt(500)
    ok = clean >= 95 and dev_norm <= bound
    return ok, f"{clean}/100 untruncated, mean deviation {dev_norm:.3e} vs bound {bound:.3e}"


# ------------------------------------------------------------------ 6


def criterion_6():
    # neighbouring inputs: exact pre-noise comparison
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 60))
        a = rng.integers(-5, 6, n)
        b = a.copy()
        b[rng.integers(n)] = rng.integers(-5, 6)
        # masses are count / n; compare the integer counts exactly
        ha = {k: round(m * n) for k, m in histogram_counts(a, n).items()}
        hb = {k: round(m * n) for k, m in histogram_counts(b, n).items()}
        keys = set(ha) | set(hb)
        diff = max(abs(ha.get(k, 0) - hb.get(k, 0)) for k in keys)
        if diff > 1 or sum(ha.get(k, 0) != hb.get(k, 0) for k in keys) > 2:
            return False, f"neighbouring counts differ by {diff}/n at n={n}"
    # accuracy at n = (8 / (eps beta)) log(4 / (alpha delta))
    eps, delta, beta, alpha = 1.0, 1e-6, 0.05, 0.1
    n = math.ceil(8 / (eps * beta) * math.log(4 / (alpha * delta)))
    probs = np.array([0.4, 0.3, 0.2, 0.08, 0.02])
    budget = PrivacyBudget(eps, delta)
    good = 0
    for s in range(200):
        values = make_rng(s, "values").choice(len(probs), size=n, p=probs)
        exact = histogram_counts(values, n)
        out = stable_histogram(values, n, budget, seed=s)
        err = max(abs(out.counts.get(k, 0.0) - h) for k, h in exact.items())
        good += err <= beta
    ok = good >= 180
    return ok, f"neighbour l_inf <= 1/n on 200 pairs; n={n}: {good}/200 runs uniformly within {beta}"


# ------------------------------------------------------------------ 7


def criterion_7():
    for d in (1, 2, 5, 10, 50, 200):
        for eps, delta in ((0.89, 1e-5), (0.5, 1e-3), (0.1, 1e-8)):
            b = PrivacyBudget(eps, delta)
            total = serial_compose([advanced_composition_total(histogram_budget(b, d), d), b.halved()])
            if not (math.isclose(total.epsilon, eps, rel_tol=1e-14) and math.isclose(total.delta, delta, rel_tol=1e-14)):
                return False, f"mean budget does not recompose at d={d}, eps={eps}, delta={delta}"
    total = PrivacyBudget(0.89, 1e-5)
    eps_sum = math.fsum(round_budget(total, i).epsilon for i in range(1, 64))
    delta_sum = math.fsum(round_budget(total, i).delta for i in range(1, 64))
    ok = eps_sum < total.epsilon and delta_sum < total.delta
    return ok, f"mean budget recomposes exactly; round budgets sum to {eps_sum / 0.89:.6f} eps"


# ------------------------------------------------------------------ 8


def criterion_8():
    d, n = 50, 20_000
    sigma = spiked_sigma(d, 1.0, 0.5)
    v1 = np.eye(d)[0]
    p = gaussian_model_params(sigma, n)
    budget = PrivacyBudget(0.89, 1e-5)
    sched = practical_schedule(p, n)
    wins = 0
    dp_errs, bl_errs = [], []
    for s in range(20):
        ds = sample_gaussian_dataset(sigma, n, s)
        cfg = DpPcaConfig(budget, default_batch_size(n), 0.01, sched, p.k_tail, p.a_tail, s)
        e_dp = sin_distance(run_dppca(ds, cfg)[0], v1)
        e_bl = sin_distance(gaussian_mechanism_pca(ds, None, budget, s, params=p), v1)
        dp_errs.append(e_dp)
        bl_errs.append(e_bl)
        wins += e_dp < e_bl
    detail = f"dppca wins {wins}/20 (medians dppca {np.median(dp_errs):.3f}, baseline {np.median(bl_errs):.3f})"
    return wins >= 14, detail


# ------------------------------------------------------------------ 9


def criterion_9():
    rng = make_rng(0, "geometry")
    bound = 2**0.25
    checked = 0
    while checked < 10_000:
        d = int(rng.integers(2, 30))
        x = uniform_sphere(rng, d)
        y = x + rng.uniform(0, 1.5) * uniform_sphere(rng, d)
        y /= np.linalg.norm(y)
        if np.linalg.norm(x - y) > bound:
            continue
        ip = float(x @ y)
        lhs = 0.5 * float(np.sum((x - y) ** 2))
        mid = 1.0 - ip**2
        rhs = min(float(np.sum((x - y) ** 2)), float(np.sum((x + y) ** 2)))
        if not (lhs <= mid + 1e-12 and mid <= rhs + 1e-12):
            return False, f"violated at d={d}: {lhs} <= {mid} <= {rhs}"
        checked += 1
    return True, f"two-sided inequality holds on {checked} pairs"


CRITERIA = [
    (1, criterion_1, 60),
    (2, criterion_2, 30),
    (3, criterion_3, 300),
    (4, criterion_4, 30),
    (5, criterion_5, 60),
    (6, criterion_6, 10),
    (7, criterion_7, 1),
    (8, criterion_8, 180),
    (9, criterion_9, 5),
]


def run(num, fn, limit):
    t0 = time.perf_counter()
    ok, detail = fn()
    return report(num, ok, detail, time.perf_counter() - t0, limit)


@pytest.mark.parametrize("num, fn, limit", CRITERIA, ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(num, fn, limit):
    assert run(num, fn, limit)


if __name__ == "__main__":
    results = [run(*c) for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
