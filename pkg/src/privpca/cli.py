"""Experiment runner: config file -> seeded trials -> CSV rows and a manifest.

Usage::

    privpca run --config exp.ini --out results.csv [--threads N] [--filter algo=oja,dppca]
    privpca summarize --in results.csv --by n,algorithm
    privpca --print-config-schema
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import itertools
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from . import __version__, _backend
from .baseline import gaussian_mechanism_pca
from .dppca import DpPcaConfig, default_batch_size, run_dppca
from .metrics import sin_distance, top_eigpair
from .model import (
    gaussian_model_params,
    sample_gaussian_dataset,
    sample_toy_dataset,
    spiked_sigma,
    toy_model_params,
)
from .oja import InverseTimeSchedule, practical_schedule, run_oja
from .private_oja import (
    ClipConfig,
    clipping_threshold_for,
    noise_multiplier,
    run_minibatch_clipped_oja,
    run_private_oja,
)
from .privacy import PrivacyBudget
from .rng import derive_seed

logger = logging.getLogger(__name__)

ALGORITHMS = ("oja", "private_oja", "minibatch_oja", "dppca", "baseline")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

CONFIG_SCHEMA = """\
# privpca experiment config (INI syntax, '#' or ';' comments).
# Lists are comma separated.

[model]
kind = gaussian            # gaussian | toy
d = 10                     # dimension
lambda1 = 1.0              # gaussian: spiked covariance diag(lambda1, lambda2, ..., lambda2)
lambda2 = 0.5
# diagonal = 1.0, 0.5, 0.5 # gaussian: explicit diagonal instead of lambda1/lambda2/d

[grid]
n = 10000, 40000           # required
epsilon = 0.89             # required
delta = 1e-5               # required
sigma_noise_sq = 0.1, 0.01 # toy model only (required there)

[run]
algorithms = oja, dppca    # subset of: oja, private_oja, minibatch_oja, dppca, baseline
trials = 20
master_seed = 0
output = results.csv       # optional; --out takes precedence
record_runtime = false     # true: fill runtime_ms (breaks byte-identical reruns)

[schedule]
alpha = 1.0                # eta_t = alpha log(n) / (gap t) unless c1 is given
# c1 = 1.0                 # eta_t = c1 / (c2 + t)
# c2 = 0.0
# batch_size = 25000       # minibatch_oja and dppca; default n / (log n)^2
batch_c1 = 1.0             # multiplier of the default batch size
zeta = 0.01
"""


class ConfigError(ValueError):
    """Invalid or missing config field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field_name = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    model_kind: str
    d: int
    diagonal: tuple
    n: tuple
    epsilon: tuple
    delta: tuple
    sigma_noise_sq: tuple
    algorithms: tuple
    trials: int
    master_seed: int
    output: Optional[str] = None
    record_runtime: bool = False
    alpha: float = 1.0
    c1: Optional[float] = None
    c2: float = 0.0
    batch_size: Optional[int] = None
    batch_c1: float = 1.0
    zeta: float = 0.01

    def grid_points(self):
        """(n, epsilon, delta, sigma_noise_sq) in deterministic order."""
        s2 = self.sigma_noise_sq if self.model_kind == "toy" else (None,)
        return list(itertools.product(self.n, self.epsilon, self.delta, s2))


@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    n: int
    d: int
    epsilon: float
    delta: float
    sigma_noise_sq: Optional[float]
    trial: int
    seed: int
    sin_error: float
    clipped_steps: int
    skipped_steps: int
    lambda_hat_mean: Optional[float]
    runtime_ms: float
    regime_valid: Optional[bool]

    def __post_init__(self):
        if not 0.0 <= self.sin_error <= 1.0:
            raise ValueError(f"sin_error out of [0, 1]: {self.sin_error}")


FIELDS = [f.name for f in fields(ResultRow)]


# --------------------------------------------------------------------------
# Config parsing
# --------------------------------------------------------------------------


def _get(cp, section, key, conv, default=..., required=False):
    name = f"{section}.{key}"
    if not cp.has_option(section, key):
        if required or default is ...:
            raise ConfigError(name, "missing")
        return default
    raw = cp.get(section, key).strip()
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, f"cannot parse {raw!r} ({exc})") from None


def _list(conv):
    def parse(raw):
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(conv(x) for x in items)

    return parse


def _int(raw):
    v = float(raw)
    if v != int(v):
        raise ValueError("not an integer")
    return int(v)


def _bool(raw):
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean")


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc)) from None
    for sec in ("model", "grid", "run"):
        if not cp.has_section(sec):
            raise ConfigError(sec, "missing section")
    kind = _get(cp, "model", "kind", str, required=True)
    if kind not in ("gaussian", "toy"):
        raise ConfigError("model.kind", f"expected gaussian or toy, got {kind!r}")
    diagonal = _get(cp, "model", "diagonal", _list(float), default=None)
    if diagonal is not None:
        if kind != "gaussian":
            raise ConfigError("model.diagonal", "only valid for the gaussian model")
        if any(x < 0 for x in diagonal):
            raise ConfigError("model.diagonal", "entries must be non-negative")
        d = len(diagonal)
    else:
        d = _get(cp, "model", "d", _int, required=True)
        if d < 2:
            raise ConfigError("model.d", "must be >= 2")
        if kind == "gaussian":
            l1 = _get(cp, "model", "lambda1", float, default=1.0)
            l2 = _get(cp, "model", "lambda2", float, default=0.5)
            if not l1 > l2 >= 0:
                raise ConfigError("model.lambda1", "need lambda1 > lambda2 >= 0")
            diagonal = (l1,) + (l2,) * (d - 1)
        else:
            diagonal = ()
    n = _get(cp, "grid", "n", _list(_int), required=True)
    if any(x < 2 for x in n):
        raise ConfigError("grid.n", "every n must be >= 2")
    eps = _get(cp, "grid", "epsilon", _list(float), required=True)
    if any(not 0 < x < 1 for x in eps):
        raise ConfigError("grid.epsilon", "every epsilon must lie in (0, 1)")
    delta = _get(cp, "grid", "delta", _list(float), required=True)
    if any(not 0 < x < 1 for x in delta):
        raise ConfigError("grid.delta", "every delta must lie in (0, 1)")
    if kind == "toy":
        s2 = _get(cp, "grid", "sigma_noise_sq", _list(float), required=True)
        if any(x <= 0 for x in s2):
            raise ConfigError("grid.sigma_noise_sq", "must be positive")
    else:
        s2 = ()
    algos = _get(cp, "run", "algorithms", _list(str), required=True)
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad:
        raise ConfigError("run.algorithms", f"unknown algorithm(s) {bad}")
    trials = _get(cp, "run", "trials", _int, default=1)
    if trials < 1:
        raise ConfigError("run.trials", "must be >= 1")
    sched = {}
    if cp.has_section("schedule"):
        sched["alpha"] = _get(cp, "schedule", "alpha", float, default=1.0)
        sched["c1"] = _get(cp, "schedule", "c1", float, default=None)
        sched["c2"] = _get(cp, "schedule", "c2", float, default=0.0)
        sched["batch_size"] = _get(cp, "schedule", "batch_size", _int, default=None)
        sched["batch_c1"] = _get(cp, "schedule", "batch_c1", float, default=1.0)
        sched["zeta"] = _get(cp, "schedule", "zeta", float, default=0.01)
        if not 0 < sched["zeta"] < 1:
            raise ConfigError("schedule.zeta", "must lie in (0, 1)")
        if sched["batch_size"] is not None and sched["batch_size"] < 4:
            raise ConfigError("schedule.batch_size", "must be >= 4")
        if sched["c1"] is not None and (sched["c1"] < 0 or sched["c2"] < 0):
            raise ConfigError("schedule.c1", "c1 and c2 must be non-negative")
        if not sched["alpha"] > 0:
            raise ConfigError("schedule.alpha", "must be positive")
    return ExperimentConfig(
        model_kind=kind,
        d=d,
        diagonal=tuple(diagonal),
        n=n,
        epsilon=eps,
        delta=delta,
        sigma_noise_sq=s2,
        algorithms=tuple(dict.fromkeys(algos)),
        trials=trials,
        master_seed=_get(cp, "run", "master_seed", _int, default=0),
        output=_get(cp, "run", "output", str, default=None),
        record_runtime=_get(cp, "run", "record_runtime", _bool, default=False),
        **sched,
    )


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    return parse_config(text)


# --------------------------------------------------------------------------
# Trials
# --------------------------------------------------------------------------


def trial_seed(cfg: ExperimentConfig, n, eps, delta, s2, trial) -> int:
    """Shared by every algorithm at a grid point, so comparisons are paired."""
    return derive_seed(cfg.master_seed, "trial", n, repr(eps), repr(delta), repr(s2), trial)


def _problem(cfg: ExperimentConfig, n: int, s2, seed: int):
    if cfg.model_kind == "gaussian":
        sigma = np.diag(cfg.diagonal)
        return sample_gaussian_dataset(sigma, n, seed), gaussian_model_params(sigma, n)
    v = np.zeros(cfg.d)
    v[0] = 1.0
    return sample_toy_dataset(v, s2, n, seed), toy_model_params(v, s2, n)


def _schedule(cfg: ExperimentConfig, params, n: int):
    if cfg.c1 is not None:
        return InverseTimeSchedule(cfg.c1, cfg.c2)
    return practical_schedule(params, n, cfg.alpha)


def _batch(cfg: ExperimentConfig, n: int) -> int:
    b = cfg.batch_size if cfg.batch_size is not None else default_batch_size(n, cfg.batch_c1)
    return min(b, n)


def run_trial(cfg: ExperimentConfig, algorithm: str, n: int, eps: float, delta: float, s2, trial: int) -> ResultRow:
    seed = trial_seed(cfg, n, eps, delta, s2, trial)
    data, params = _problem(cfg, n, s2, seed)
    _, v1 = top_eigpair(params.sigma)
    budget = PrivacyBudget(eps, delta)
    clipped = skipped = 0
    lam = None
    regime = None
    start = time.perf_counter()
    if algorithm == "oja":
        w = run_oja(data, _schedule(cfg, params, n), seed)
    elif algorithm == "private_oja":
        alpha, _ = noise_multiplier(n, budget)
        clip_cfg = ClipConfig(clipping_threshold_for(params, n, cfg.zeta), alpha)
        w, rep = run_private_oja(data, budget, _schedule(cfg, params, n), clip_cfg, seed)
        clipped, regime = rep.clipped_steps, rep.regime_valid
    elif algorithm == "minibatch_oja":
        T = max(n // _batch(cfg, n), 1)
        beta = clipping_threshold_for(params, n, cfg.zeta)
        w, rep = run_minibatch_clipped_oja(data, budget, T, _schedule(cfg, params, n), beta, seed, return_report=True)
        clipped = rep.clipped
    elif algorithm == "dppca":
        dcfg = DpPcaConfig(budget, _batch(cfg, n), cfg.zeta, _schedule(cfg, params, n), params.k_tail, params.a_tail, seed)
        w, rep = run_dppca(data, dcfg, params)
        skipped, regime = rep.n_skipped, rep.regime_valid
        lam = rep.lambda_hat_mean
        if math.isnan(lam):
            lam = None
    elif algorithm == "baseline":
        w, rep = gaussian_mechanism_pca(data, None, budget, seed, params=params, return_report=True)
        clipped = rep.projected
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    elapsed = (time.perf_counter() - start) * 1000.0
    return ResultRow(
        algorithm=algorithm,
        n=n,
        d=params.dim,
        epsilon=eps,
        delta=delta,
        sigma_noise_sq=s2,
        trial=trial,
        seed=seed,
        sin_error=min(sin_distance(w, v1), 1.0),
        clipped_steps=int(clipped),
        skipped_steps=int(skipped),
        lambda_hat_mean=lam,
        runtime_ms=round(elapsed, 3) if cfg.record_runtime else 0.0,
        regime_valid=regime,
    )


def _tasks(cfg: ExperimentConfig, filters: dict):
    out = []
    for (n, eps, delta, s2), algo, trial in itertools.product(cfg.grid_points(), cfg.algorithms, range(cfg.trials)):
        key = {"algo": algo, "algorithm": algo, "n": n, "epsilon": eps, "delta": delta, "sigma_noise_sq": s2, "trial": trial}
        if all(str(key.get(k)) in vals or _num_in(key.get(k), vals) for k, vals in filters.items()):
            out.append((algo, n, eps, delta, s2, trial))
    return out


def _num_in(value, vals) -> bool:
    if isinstance(value, str) or value is None:
        return False
    try:
        return any(float(v) == value for v in vals)
    except ValueError:
        return False


def parse_filters(items: Sequence[str]) -> dict:
    out: dict[str, set] = {}
    allowed = {"algo", "algorithm", "n", "epsilon", "delta", "sigma_noise_sq", "trial"}
    for item in items or ():
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or key not in allowed:
            raise ConfigError("--filter", f"expected key=value with key in {sorted(allowed)}, got {item!r}")
        out.setdefault(key, set()).update(v.strip() for v in val.split(",") if v.strip())
    return out


def run_experiment(cfg: ExperimentConfig, threads: int = 1, filters: Optional[dict] = None) -> list[ResultRow]:
    """Every (grid point, algorithm, trial) in a fixed order, independent of ``threads``."""
    tasks = _tasks(cfg, filters or {})
    if threads <= 1:
        return [run_trial(cfg, *t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: run_trial(cfg, *t), tasks))


# --------------------------------------------------------------------------
# CSV and manifest
# --------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(rows: Sequence[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(FIELDS)
    for r in rows:
        writer.writerow([_fmt(getattr(r, f)) for f in FIELDS])
    return buf.getvalue()


_PARSERS = {
    "algorithm": str,
    "n": int,
    "d": int,
    "epsilon": float,
    "delta": float,
    "sigma_noise_sq": float,
    "trial": int,
    "seed": int,
    "sin_error": float,
    "clipped_steps": int,
    "skipped_steps": int,
    "lambda_hat_mean": float,
    "runtime_ms": float,
    "regime_valid": lambda s: s == "true",
}


def parse_csv(text: str) -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != FIELDS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    rows = []
    for rec in reader:
        kw = {k: (None if rec[k] == "" else _PARSERS[k](rec[k])) for k in FIELDS}
        rows.append(ResultRow(**kw))
    return rows


def manifest(cfg: ExperimentConfig, rows: Sequence[ResultRow]) -> dict:
    return {
        "library": "privpca",
        "version": __version__,
        "backend": _backend.BACKEND,
        "numpy": np.__version__,
        "config": asdict(cfg),
        "rows": [
            {
                "algorithm": r.algorithm,
                "n": r.n,
                "epsilon": r.epsilon,
                "delta": r.delta,
                "sigma_noise_sq": r.sigma_noise_sq,
                "trial": r.trial,
                "seed": r.seed,
            }
            for r in rows
        ],
    }


def config_from_manifest(data: dict) -> ExperimentConfig:
    """Rebuild the config echoed in a manifest (for replaying single rows)."""
    c = dict(data["config"])
    for k in ("diagonal", "n", "epsilon", "delta", "sigma_noise_sq", "algorithms"):
        c[k] = tuple(c[k])
    return ExperimentConfig(**c)


def replay_row(data: dict, index: int) -> ResultRow:
    cfg = config_from_manifest(data)
    r = data["rows"][index]
    return run_trial(cfg, r["algorithm"], r["n"], r["epsilon"], r["delta"], r["sigma_noise_sq"], r["trial"])


# --------------------------------------------------------------------------
# Summaries
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    key: tuple
    count: int
    median: float
    q1: float
    q3: float

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def summarize(rows: Sequence[ResultRow], group_keys: Sequence[str]) -> list[SummaryRow]:
    """Median and interquartile range of sin_error per group, sorted by key."""
    if not rows:
        raise ValueError("no rows to summarize")
    for k in group_keys:
        if k not in FIELDS:
            raise ValueError(f"unknown group key {k!r}")
    groups: dict[tuple, list] = {}
    for r in rows:
        groups.setdefault(tuple(getattr(r, k) for k in group_keys), []).append(r.sin_error)
    out = []
    for key in sorted(groups, key=lambda t: tuple((x is None, str(type(x)), x if x is not None else 0) for x in t)):
        vals = np.asarray(groups[key])
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        out.append(SummaryRow(key, len(vals), float(med), float(q1), float(q3)))
    return out


def format_summary(summary: Sequence[SummaryRow], group_keys: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(list(group_keys) + ["count", "median", "q1", "q3", "iqr"])
    for s in summary:
        writer.writerow([_fmt(x) for x in s.key] + [s.count, repr(s.median), repr(s.q1), repr(s.q3), repr(s.iqr)])
    return buf.getvalue()


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="privpca", description="Private streaming PCA experiments")
    p.add_argument("--print-config-schema", action="store_true", help="print the config file format and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run an experiment grid")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="CSV path (default: run.output from the config)")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--filter", action="append", default=[], metavar="KEY=V1,V2")
    s = sub.add_parser("summarize", help="median/IQR of sin_error per group")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--by", default="n,algorithm")
    return p


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        filters = parse_filters(args.filter)
        out = args.out or cfg.output
        if not out:
            raise ConfigError("--out", "no output path given (use --out or run.output)")
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = run_experiment(cfg, args.threads, filters)
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(emit_csv(rows))
        with open(out + ".manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest(cfg, rows), fh, indent=1, sort_keys=True)
            fh.write("\n")
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        logger.debug("run failed", exc_info=True)
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def _cmd_summarize(args) -> int:
    keys = [k.strip() for k in args.by.split(",") if k.strip()]
    try:
        with open(args.inp, encoding="utf-8", newline="") as fh:
            rows = parse_csv(fh.read())
        table = summarize(rows, keys)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    sys.stdout.write(format_summary(table, keys))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.print_config_schema:
        sys.stdout.write(CONFIG_SCHEMA)
        return EXIT_OK
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "summarize":
        return _cmd_summarize(args)
    parser.print_help(sys.stderr)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
