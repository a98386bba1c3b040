import csv

import pytest

from lifeins.cli import (EXIT_INFEASIBLE, EXIT_NONCONVERGENCE, EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, fmt, main)
from lifeins.lifetable import rows_to_csv, synthetic_cohort
from lifeins.mortality import GompertzParams

FAST = ["--set", "solver.dt=0.5", "--set", "solver.nodes=60"]


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_fmt_six_significant_digits():
    assert fmt(3.14159265) == "3.14159"
    assert fmt(-0.0) == "0"
    assert fmt(1234567.0) == "1.23457e+06"
    assert fmt(7) == "7"


def test_calibrate_synthetic_cohort(tmp_path, capsys):
    src = tmp_path / "cohort.csv"
    src.write_text(rows_to_csv(synthetic_cohort(GompertzParams(m=86.0, b=10.0))))
    assert main(["calibrate", str(src), "--out", str(tmp_path / "out")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "least squares  b=10 m=86" in out
    rows = read_csv(tmp_path / "out" / "calibration.csv")
    assert rows[0]["age"] == "25" and len(rows) == 86


def test_calibrate_empty_file(tmp_path, capsys):
    src = tmp_path / "empty.csv"
    src.write_text("")
    assert main(["calibrate", str(src)]) == EXIT_PARSE
    assert "empty" in capsys.readouterr().err


def test_calibrate_flat_table_does_not_converge(tmp_path):
    lines = ["country,age,lx,dx"] + [f"X,{a},100,0" for a in range(25, 110)] + ["X,110,100,100"]
    src = tmp_path / "flat.csv"
    src.write_text("\n".join(lines) + "\n")
    assert main(["calibrate", str(src)]) == EXIT_NONCONVERGENCE


def test_loads_default_table(capsys):
    assert main(["loads"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "load,kappa_ins,m_ins,kappa_ann,m_ann"
    assert lines[1] == "0,1,88.23,1,88.23"
    assert lines[10].startswith("0.18,4.7446")
    assert len(lines) == 12


def test_loads_age_sweep(tmp_path):
    out = tmp_path / "fig.csv"
    assert main(["loads", "--sweep", "0.18", "--out", str(out)]) == EXIT_OK
    rows = read_csv(out)
    assert rows[0]["age"] == "25" and rows[-1]["age"] == "95"
    row65 = next(r for r in rows if r["age"] == "65")
    assert float(row65["load_ins"]) == pytest.approx(0.18, abs=1e-6)
    l_ins = [float(r["load_ins"]) for r in rows]
    assert all(b < a for a, b in zip(l_ins, l_ins[1:]))


def test_loads_rejects_bad_load():
    assert main(["loads", "--load", "1.5"]) == EXIT_VALIDATION


def test_profiles(capsys):
    assert main(["profiles", "--step", "5"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "-0.000763, 0.0398, 10.65" in out
    assert "c_b(20)=-4897.43" in out


def test_solve_writes_outputs_deterministically(tmp_path):
    args = ["solve", "--preset", "postret-fair", *FAST]
    assert main(args + ["--out", str(tmp_path / "a"), "--no-cache"]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b"), "--cache-dir", str(tmp_path / "cache")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "c"), "--cache-dir", str(tmp_path / "cache")]) == EXIT_OK
    for name in ("trajectory.csv", "policy.csv", "participation.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        assert a == (tmp_path / "b" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()
    traj = read_csv(tmp_path / "a" / "trajectory.csv")
    assert traj[0]["age"] == "65" and traj[0]["wealth"] == "500000"


def test_solve_with_config_file(tmp_path):
    cfg = tmp_path / "s.ini"
    cfg.write_text("[scenario]\ninitial_age = 100\ninitial_wealth = 100000\n[solver]\ndt = 0.5\nnodes = 40\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o"), "--no-policy"]) == EXIT_OK
    assert not (tmp_path / "o" / "policy.csv").exists()
    assert len(read_csv(tmp_path / "o" / "trajectory.csv")) == 20


def test_solve_exit_codes(tmp_path):
    base = ["solve", "--preset", "postret-18", "--out", str(tmp_path), "--no-cache", *FAST]
    assert main(base + ["--set", "solver.speed=1"]) == EXIT_PARSE
    assert main(base + ["--set", "nodot=1"]) == EXIT_PARSE
    assert main(base + ["--set", "preferences.sigma=1"]) == EXIT_VALIDATION
    assert main(base + ["--set", "scenario.initial_wealth=-1e8"]) == EXIT_INFEASIBLE


def test_table3_small_grid(tmp_path, capsys):
    args = ["table3", *FAST, "--loads", "0", "0.2", "--ages", "65", "70", "--out", str(tmp_path)]
    assert main(args) == EXIT_OK
    rows = read_csv(tmp_path / "table3.csv")
    assert [r["age"] for r in rows] == ["65", "70", "65", "70"]
    assert float(rows[0]["demand"]) > 1000
    assert float(rows[0]["demand_hundreds"]) == pytest.approx(float(rows[0]["demand"]) / 100, rel=1e-5)
    assert all(r["demand"] == "0" for r in rows[2:])
    assert "($100s/year)" in capsys.readouterr().out


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--preset", "nonexistent"])
    assert exc.value.code == 2
