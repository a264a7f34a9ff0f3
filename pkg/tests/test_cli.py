import json

import pytest
from hypothesis import given, strategies as st

from privpca import cli
from privpca.cli import ConfigError, ResultRow, emit_csv, parse_config, parse_csv, run_experiment, summarize

BASE = """
[model]
kind = gaussian
d = 10
lambda1 = 1.0
lambda2 = 0.5

[grid]
n = {n}
epsilon = 0.89
delta = 1e-5

[run]
algorithms = {algos}
trials = {trials}
master_seed = 7
"""


def conf(n="2000", algos="oja", trials=1, extra=""):
    return parse_config(BASE.format(n=n, algos=algos, trials=trials) + extra)


def write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_single_trial_single_row():
    rows = run_experiment(conf())
    assert len(rows) == 1
    assert rows[0].algorithm == "oja" and 0 <= rows[0].sin_error <= 1


def test_cross_product_row_count():
    rows = run_experiment(conf("10000, 40000", "oja, dppca", 20))
    assert len(rows) == 80
    assert {(r.n, r.algorithm) for r in rows} == {(n, a) for n in (10000, 40000) for a in ("oja", "dppca")}


def test_all_algorithms_run():
    toy = """
[model]
kind = toy
d = 4
[grid]
n = 3000
epsilon = 0.5
delta = 1e-5
sigma_noise_sq = 0.01
[run]
algorithms = oja, private_oja, minibatch_oja, dppca, baseline
trials = 2
master_seed = 1
"""
    rows = run_experiment(parse_config(toy))
    assert len(rows) == 10
    assert [r.algorithm for r in rows[::2]] == ["oja", "private_oja", "minibatch_oja", "dppca", "baseline"]
    # paired seeds: every algorithm of one trial sees the same seed
    by_trial = {}
    for r in rows:
        by_trial.setdefault(r.trial, set()).add(r.seed)
    assert all(len(s) == 1 for s in by_trial.values())


def test_rerun_is_byte_identical(tmp_path):
    cfg_path = write(tmp_path, BASE.format(n="1000, 2000", algos="oja, private_oja, dppca", trials=3))
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    assert cli.main(["run", "--config", cfg_path, "--out", a]) == 0
    assert cli.main(["run", "--config", cfg_path, "--out", b]) == 0
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


def test_threads_do_not_change_output():
    cfg = conf("1000, 2000", "oja, dppca", 4)
    assert emit_csv(run_experiment(cfg, threads=4)) == emit_csv(run_experiment(cfg))


def test_csv_round_trip():
    rows = run_experiment(conf("1500", "oja, dppca", 3))
    assert parse_csv(emit_csv(rows)) == rows


finite = st.floats(allow_nan=False, allow_infinity=False)
row_st = st.builds(
    ResultRow,
    algorithm=st.sampled_from(cli.ALGORITHMS),
    n=st.integers(1, 10**7),
    d=st.integers(1, 100),
    epsilon=finite,
    delta=finite,
    sigma_noise_sq=st.none() | finite,
    trial=st.integers(0, 100),
    seed=st.integers(0, 2**64 - 1),
    sin_error=st.floats(0, 1),
    clipped_steps=st.integers(0, 10**6),
    skipped_steps=st.integers(0, 10**6),
    lambda_hat_mean=st.none() | finite,
    runtime_ms=finite,
    regime_valid=st.none() | st.booleans(),
)


@given(st.lists(row_st, max_size=6))
def test_csv_round_trip_property(rows):
    assert parse_csv(emit_csv(rows)) == rows


def test_manifest_replays_row(tmp_path):
    cfg_path = write(tmp_path, BASE.format(n="1000, 2000", algos="oja, private_oja, dppca", trials=2))
    out = str(tmp_path / "r.csv")
    assert cli.main(["run", "--config", cfg_path, "--out", out]) == 0
    with open(out + ".manifest.json") as fh:
        data = json.load(fh)
    with open(out, newline="") as fh:
        rows = parse_csv(fh.read())
    for i in (0, 5, len(rows) - 1):
        assert cli.replay_row(data, i) == rows[i]


def _row(err, n=1000, algo="oja"):
    return ResultRow(algo, n, 2, 1.0, 1e-5, None, 0, 0, err, 0, 0, None, 0.0, None)


def test_summary_single_row():
    (s,) = summarize([_row(0.3)], ["algorithm"])
    assert s.median == 0.3 and s.count == 1


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.randoms())
def test_summary_permutation_invariant(errs, rnd):
    rows = [_row(e) for e in errs]
    shuffled = rows[:]
    rnd.shuffle(shuffled)
    assert summarize(rows, ["n"]) == summarize(shuffled, ["n"])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=31).filter(lambda x: len(x) % 2 == 1))
def test_summary_odd_median_is_middle(errs):
    (s,) = summarize([_row(e) for e in errs], ["algorithm"])
    assert s.median == sorted(errs)[len(errs) // 2]


def test_summary_groups_and_errors():
    rows = [_row(0.1, 10), _row(0.3, 10), _row(0.5, 20), _row(0.2, 10, "dppca")]
    table = summarize(rows, ["n", "algorithm"])
    assert [s.key for s in table] == [(10, "dppca"), (10, "oja"), (20, "oja")]
    assert table[1].median == pytest.approx(0.2)
    with pytest.raises(ValueError):
        summarize([], ["n"])
    with pytest.raises(ValueError):
        summarize(rows, ["nope"])


def test_sin_error_range_enforced():
    with pytest.raises(ValueError):
        _row(1.5)


@pytest.mark.parametrize(
    "text, field",
    [
        (BASE.format(n="", algos="oja", trials=1), "grid.n"),
        (BASE.format(n="1000", algos="oja", trials=0), "run.trials"),
        (BASE.format(n="1000", algos="pca", trials=1), "run.algorithms"),
        (BASE.format(n="abc", algos="oja", trials=1), "grid.n"),
        (BASE.replace("kind = gaussian", "kind = cauchy").format(n="1000", algos="oja", trials=1), "model.kind"),
        (BASE.replace("delta = 1e-5\n", "").format(n="1000", algos="oja", trials=1), "grid.delta"),
    ],
)
def test_config_errors_name_field(text, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field_name == field
    assert field in str(exc.value)


def test_exit_codes(tmp_path, capsys):
    good = write(tmp_path, BASE.format(n="1000", algos="oja", trials=1))
    bad = write(tmp_path, BASE.format(n="1000", algos="oja", trials=0), "bad.ini")
    assert cli.main(["run", "--config", str(tmp_path / "missing.ini"), "--out", "x.csv"]) == 2
    assert cli.main(["run", "--config", bad, "--out", str(tmp_path / "x.csv")]) == 2
    assert "run.trials" in capsys.readouterr().err
    assert cli.main(["run", "--config", good, "--out", str(tmp_path / "no" / "such" / "dir.csv")]) == 3
    assert cli.main(["bogus"]) == 2


def test_print_config_schema(capsys):
    assert cli.main(["--print-config-schema"]) == 0
    out = capsys.readouterr().out
    for key in ("[model]", "[grid]", "[run]", "[schedule]", "master_seed"):
        assert key in out
    assert parse_config(out).trials == 20


def test_summarize_command(tmp_path, capsys):
    cfg_path = write(tmp_path, BASE.format(n="1000", algos="oja, dppca", trials=3))
    out = str(tmp_path / "r.csv")
    assert cli.main(["run", "--config", cfg_path, "--out", out]) == 0
    capsys.readouterr()
    assert cli.main(["summarize", "--in", out, "--by", "algorithm"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("algorithm,count,median")
    assert len(lines) == 3


def test_filter_subset():
    cfg = conf("1000, 2000", "oja, dppca", 2)
    rows = run_experiment(cfg, filters=cli.parse_filters(["algo=dppca", "n=2000"]))
    assert len(rows) == 2 and {(r.algorithm, r.n) for r in rows} == {("dppca", 2000)}
