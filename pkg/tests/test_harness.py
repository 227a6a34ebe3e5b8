import csv
import io

import pytest

from pttc import cli
from pttc.harness import (
    CSV_COLUMNS,
    ExperimentSpec,
    dp_audit,
    exact_ttc_mechanism,
    format_csv,
    identity_mechanism,
    lb_marginal_pair,
    pareto_ceiling,
    run_experiment,
    run_trial,
    trial_seed,
)
from pttc.instances import GeneratorSpec, gen_lb_marginal, parse_generator_spec
from pttc.market import write_market
from pttc.privacy import PrivacyBudget

from conftest import swap_market


def test_pareto_ceiling():
    assert pareto_ceiling(3, 0.0) == 3 * 6
    assert pareto_ceiling(2, 1.0) == 2 * 4 * 3


def test_trial_seed_is_xor():
    assert trial_seed(0b1010, 3) == 0b1001


def test_run_trial_fields():
    m = gen_lb_marginal(10, 3, 1)
    row = run_trial(m, PrivacyBudget(1.0, 0.01, 0.01, 0.01, 3), seed=1)
    assert set(CSV_COLUMNS) - {"row"} <= set(row)
    assert row["ir"] == 1 and row["rounds"] <= 3
    assert row["dominance_gap"] == 3  # nothing clears at this scale


def test_zero_noise_sweep_has_no_gap():
    spec = ExperimentSpec(
        generator=parse_generator_spec("random:n=12,k=4"), trials=50, seed=5, zero_noise=True
    )
    rows = run_experiment(spec)
    assert len(rows) == 51 and rows[-1]["row"] == "mean"
    assert all(r["dominance_gap"] == 0 for r in rows)
    # a fresh market per trial
    assert len({r["seed"] for r in rows[:-1]}) == 50


def test_csv_schema_and_reproducibility():
    spec = ExperimentSpec(
        epsilon=2.0, generator=GeneratorSpec("lb_marginal", 20, 3), trials=5, seed=3
    )
    text = format_csv(run_experiment(spec))
    assert text == format_csv(run_experiment(spec))
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3", "4", "mean"]
    assert "\r" not in text


def test_eps_and_n_sweeps_emit_one_block_per_point():
    gen = GeneratorSpec("lb_marginal", 20, 3)
    rows = run_experiment(ExperimentSpec(generator=gen, trials=3, mode="eps-sweep", grid=(0.5, 4)))
    assert [r["epsilon"] for r in rows if r["row"] == "mean"] == [0.5, 4.0]
    rows = run_experiment(ExperimentSpec(generator=gen, trials=3, mode="n-sweep", grid=(20, 40)))
    assert [r["n"] for r in rows if r["row"] == "mean"] == [20, 40]


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(trials=1)
    with pytest.raises(ValueError):
        ExperimentSpec(generator=GeneratorSpec("random", 5), trials=0)
    with pytest.raises(ValueError):
        ExperimentSpec(generator=GeneratorSpec("random", 5), mode="eps-sweep")
    with pytest.raises(ValueError):
        ExperimentSpec(market_path="m.txt", mode="n-sweep", grid=(5,))


def test_market_file_source(tmp_path):
    write_market(swap_market(), tmp_path / "m.txt")
    spec = ExperimentSpec(market_path=str(tmp_path / "m.txt"), trials=2, zero_noise=True)
    rows = run_experiment(spec)
    assert rows[0]["dominance_gap"] == 0 and rows[0]["cycles"] == 1


def test_workers_give_identical_rows():
    gen = GeneratorSpec("random", 15, 3)
    serial = run_experiment(ExperimentSpec(epsilon=1e4, generator=gen, trials=8, seed=1))
    pooled = run_experiment(ExperimentSpec(epsilon=1e4, generator=gen, trials=8, seed=1, workers=2))
    assert format_csv(serial) == format_csv(pooled)


def test_audit_constant_mechanism_passes():
    x, xp = lb_marginal_pair(6, 3)
    res = dp_audit(identity_mechanism, x, xp, agent=0, good=1, trials=200, epsilon=0.0)
    assert res.count == res.count_prime == 0
    assert res.smoothed_ratio == 1.0 and res.passed


def test_audit_exact_ttc_fails():
    x, xp = lb_marginal_pair(6, 3)
    res = dp_audit(exact_ttc_mechanism, x, xp, agent=0, good=1, trials=500, epsilon=1.0)
    assert res.p == 1.0 and res.p_prime == 0.0
    assert not res.passed
    assert res.summary().startswith("FAIL")


def test_audit_rejects_bad_pairs():
    x, _ = lb_marginal_pair(6, 3)
    with pytest.raises(ValueError, match="exactly one"):
        dp_audit(identity_mechanism, x, x, 0, 1, trials=10)
    x, xp = lb_marginal_pair(6, 3)
    with pytest.raises(ValueError, match="changes"):
        dp_audit(identity_mechanism, x, xp, 2, 1, trials=10)


# -- CLI --------------------------------------------------------------------


def test_cli_run_to_file(tmp_path, capsys):
    out = tmp_path / "r.csv"
    trace = tmp_path / "t.txt"
    code = cli.main([
        "run", "--gen", "lb_marginal:k=3,n=12", "--epsilon", "1", "--trials", "4",
        "--seed", "2", "--out", str(out), "--trace", str(trace),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS) and len(lines) == 6
    assert trace.read_text().startswith("# zero_noise=0")


def test_cli_zero_noise_env(tmp_path, monkeypatch, capsys):
    write_market(swap_market(), tmp_path / "m.txt")
    monkeypatch.setenv("PTTC_ZERO_NOISE", "1")
    assert cli.main(["run", "--market", str(tmp_path / "m.txt"), "--trials", "2"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows[0]["cycles"] == "1" and rows[0]["dominance_gap"] == "0"


def test_cli_eps_grid(capsys):
    assert cli.main(["run", "--gen", "lb_marginal:k=3,n=9", "--trials", "2", "--eps-grid", "1,2"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 6


def test_cli_oracle(tmp_path, capsys):
    write_market(gen_lb_marginal(5, 3, 1), tmp_path / "m.txt")
    for method in ("ttc", "ip"):
        assert cli.main(["oracle", "--market", str(tmp_path / "m.txt"), "--method", method]) == 0
        assert capsys.readouterr().out == "0 1\n1 2\n2 0\n3 2\n4 2\n"


def test_cli_audit_exit_codes(capsys):
    args = ["audit", "--gen", "lb_marginal:k=3,n=12", "--agent", "0", "--good", "1", "--trials", "300"]
    assert cli.main(args + ["--mech", "ttc"]) == 1
    assert capsys.readouterr().out.startswith("FAIL")
    assert cli.main(args) == 0
    assert capsys.readouterr().out.startswith("PASS")


def test_cli_reports_missing_file(tmp_path, capsys):
    assert cli.main(["oracle", "--market", str(tmp_path / "nope.txt")]) == 2
    assert "nope.txt" in capsys.readouterr().err
