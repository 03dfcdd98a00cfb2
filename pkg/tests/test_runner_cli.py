import json

import pytest

from mixpc import emit_instance, gen_random_ccfl, gen_random_ompc
from mixpc.cli import main
from mixpc.runner import (
    ExperimentConfig,
    report_to_csv,
    run_experiment,
    suite_ompc_adversary,
    suite_ompc_random,
)

REPORT_HEADER = (
    "instance,seed,algorithm,m,n,d,rho,kappa,sigma,online,oracle,ratio,bound,"
    "phases,trials,epochs,witness,wall_time_s"
)


def strip_wall_time(csv_text: str) -> str:
    lines = csv_text.strip().splitlines()
    return "\n".join(",".join(line.split(",")[:-1]) for line in lines)


def test_suite_ompc_random_small_passes():
    rep = suite_ompc_random(count=4, seed=2)
    assert rep.passed, rep.violations
    assert len(rep.records) == 4
    for rec in rep.records:
        assert rec.ratio >= 1.0 - 1e-9
        assert rec.online <= rec.bound * rec.oracle * (1 + 1e-9)


def test_suite_ompc_adversary_uniform_small():
    rep = suite_ompc_adversary(ms=(2,), ds=(2,), algorithm="uniform")
    assert rep.passed, rep.violations
    rec = rep.records[0]
    assert rec.witness == 1.0
    assert rec.online >= rec.bound - 1e-12


def test_report_determinism_modulo_wall_time():
    a = report_to_csv(suite_ompc_random(count=3, seed=5))
    b = report_to_csv(suite_ompc_random(count=3, seed=5))
    assert strip_wall_time(a) == strip_wall_time(b)
    assert a.splitlines()[0] == REPORT_HEADER


def test_run_experiment_dispatch_and_unknown():
    rep = run_experiment(ExperimentConfig(suite="ompc-random", count=2, seed=1))
    assert len(rep.records) == 2
    with pytest.raises(ValueError):
        run_experiment(ExperimentConfig(suite="nope"))


def test_online_never_beats_oracle_across_suites():
    for rep in (
        suite_ompc_random(count=3, seed=7),
        suite_ompc_adversary(ms=(2, 4), ds=(2,), algorithm="uniform"),
    ):
        for rec in rep.records:
            if rec.ratio is not None:
                assert rec.ratio >= 1.0 - 1e-9


def test_cli_solve_ompc_roundtrip(tmp_path, capsys):
    inst = gen_random_ompc(4, 6, 5, 0.6, (1.0, 3.0), seed=3)
    path = tmp_path / "inst.txt"
    path.write_text(emit_instance(inst))
    code = main(["solve-ompc", "--instance", str(path), "--bound-check"])
    out = capsys.readouterr().out
    assert code == 0
    assert "lambda" in out and "oracle" in out


def test_cli_adversary_writes_instance(tmp_path, capsys):
    out_path = tmp_path / "adv.txt"
    code = main(
        [
            "adversary",
            "--m",
            "2",
            "--d",
            "2",
            "--algorithm",
            "uniform",
            "--out",
            str(out_path),
            "--bound-check",
        ]
    )
    assert code == 0
    text = out_path.read_text()
    assert text.startswith("mixpc-instance v1")
    code = main(["oracle", "--instance", str(out_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "opt" in out


def test_cli_solve_ccfl_and_round(tmp_path, capsys):
    inst = gen_random_ccfl(3, 4, seed=6)
    path = tmp_path / "ccfl.txt"
    path.write_text(emit_instance(inst))
    log_path = tmp_path / "log.jsonl"
    code = main(
        [
            "solve-ccfl",
            "--instance",
            str(path),
            "--seed",
            "4",
            "--out",
            str(log_path),
            "--bound-check",
        ]
    )
    assert code == 0
    records = [json.loads(line) for line in log_path.read_text().splitlines()]
    assert len(records) == 4
    assert all(r["assigned"] >= 0 for r in records)
    code = main(["round", "--instance", str(path), "--seed", "4"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count('"client"') == 4


def test_cli_oracle_brute_and_opt1(tmp_path, capsys):
    inst = gen_random_ccfl(3, 4, seed=6)
    path = tmp_path / "ccfl.txt"
    path.write_text(emit_instance(inst))
    assert main(["oracle", "--instance", str(path), "--brute"]) == 0
    brute_line = capsys.readouterr().out.strip()
    zstar = float(brute_line.split()[1])
    assert main(["oracle", "--instance", str(path), "--z", repr(zstar)]) == 0
    opt1_line = capsys.readouterr().out.strip()
    assert float(opt1_line.split()[1]) >= zstar - 1e-9


def test_cli_input_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("definitely not an instance\n")
    assert main(["solve-ompc", "--instance", str(bad)]) == 2
    missing = tmp_path / "missing.txt"
    assert main(["solve-ompc", "--instance", str(missing)]) == 2
    inst = gen_random_ccfl(3, 4, seed=6)
    path = tmp_path / "ccfl.txt"
    path.write_text(emit_instance(inst))
    assert main(["solve-ompc", "--instance", str(path)]) == 2
    assert main(["oracle", "--instance", str(path)]) == 2
    capsys.readouterr()


def test_cli_suite_smoke(tmp_path):
    out = tmp_path / "report.csv"
    code = main(
        [
            "suite",
            "--name",
            "ompc-random",
            "--count",
            "2",
            "--seed",
            "3",
            "--out",
            str(out),
            "--bound-check",
        ]
    )
    assert code == 0
    text = out.read_text()
    assert text.splitlines()[0] == REPORT_HEADER
    assert len(text.strip().splitlines()) == 3
