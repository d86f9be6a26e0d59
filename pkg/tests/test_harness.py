import csv
import math

import numpy as np
import pytest

from memsfb.cli import run_cli
from memsfb.core import Params
from memsfb.oracles import boundary_miss, fold_lambda, reach, reach_closed_form, shooting_oracle
from memsfb.sweep import COLUMNS, RunConfig, config_from_mapping, read_config, sweep_pull_in

FOLD = fold_lambda()


def small_sweep(tmp_path, name="s.csv", **kw):
    base = dict(model="small_gap", betas=[0.0], taus=[1.0, 2.0], n=15, dt=5e-3, T_long=20.0,
                resolution=2e-2, out=str(tmp_path / name))
    base.update(kw)
    return RunConfig(**base)


def test_oracle_zero_voltage():
    r = shooting_oracle(0.0, with_fold=False, n=31)
    assert r.centers == [0.0] and np.all(r.solutions[0].values == 0)


@pytest.mark.parametrize("frac", [0.5, 0.9, 0.999, 0.9999])
def test_oracle_two_roots_below_fold(frac):
    r = shooting_oracle(frac * FOLD, n=31)
    assert len(r.centers) == 2
    for m in r.centers:
        assert abs(boundary_miss(m, frac * FOLD)) < 1e-9


def test_oracle_no_root_above_fold():
    assert shooting_oracle(1.01 * FOLD, n=31, with_fold=False).centers == []


def test_fold_reproducible_and_below_ceiling():
    a, b = fold_lambda(rtol=1e-12), fold_lambda(rtol=1e-10)
    assert abs(a - b) <= 1e-8 * a
    assert a <= math.pi**2 / 4
    assert fold_lambda(closed_form=True) == pytest.approx(a, rel=1e-10)
    assert fold_lambda(tau=2.0) == pytest.approx(2 * a, rel=1e-10)


@pytest.mark.parametrize("m", [-0.9, -0.5, -0.1])
def test_reach_matches_closed_form(m):
    assert reach(m) == pytest.approx(reach_closed_form(m), rel=1e-10)


def test_empty_lambda_range_rejected_before_running(tmp_path):
    with pytest.raises(ValueError):
        small_sweep(tmp_path, lam_min=0.4, lam_max=0.3)
    with pytest.raises(ValueError):
        small_sweep(tmp_path, taus=[])
    assert not list(tmp_path.iterdir())


def test_unwritable_output_rejected(tmp_path):
    with pytest.raises(ValueError):
        small_sweep(tmp_path, out="/nonexistent-dir/x.csv")


@pytest.fixture(scope="module")
def sweep_pair(tmp_path_factory):
    d = tmp_path_factory.mktemp("sweep")
    one = sweep_pull_in(small_sweep(d, "w1.csv", workers=1))
    sweep_pull_in(small_sweep(d, "w2.csv", workers=2))
    return d, one


def test_sweep_rows_and_schema(sweep_pair):
    d, tab = sweep_pair
    lines = (d / "w1.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert [r["tau"] for r in tab.rows] == [1.0, 2.0]
    assert not (d / "w1.csv.partial").exists()
    for r in tab.rows:
        assert r["status"] == "ok"
        assert abs(r["lambda_dyn"] - r["lambda_stat"]) <= tab.resolution


def test_sweep_deterministic_across_workers(sweep_pair):
    d, _ = sweep_pair
    assert (d / "w1.csv").read_bytes() == (d / "w2.csv").read_bytes()


def test_sweep_resumes_from_partial(sweep_pair, tmp_path):
    d, _ = sweep_pair
    rows = (d / "w1.csv").read_text(encoding="utf-8").splitlines()
    marker = rows[1].split(",")
    marker[4] = "9.75"  # a value no run would produce
    (tmp_path / "r.csv.partial").write_text("\n".join([rows[0], ",".join(marker)]) + "\n", encoding="utf-8")
    tab = sweep_pull_in(small_sweep(tmp_path, "r.csv"))
    assert tab.rows[0]["lambda_stat"] == 9.75
    out = (tmp_path / "r.csv").read_text(encoding="utf-8").splitlines()
    assert out[2] == rows[2]


def test_failed_rows_are_recorded(tmp_path):
    tab = sweep_pull_in(small_sweep(tmp_path, taus=[1.0], max_points=2))
    assert tab.rows[0]["status"].startswith("failed: ContinuationError")


def test_config_file_round_trip(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\nmodel = sg\ntaus = 1, 2\nn = 15\nresolution = 0.05  # coarse\nlam_min = none\n")
    values = read_config(cfg)
    values["out"] = str(tmp_path / "o.csv")
    rc = config_from_mapping(values)
    assert rc.model == "small_gap" and rc.taus == [1.0, 2.0] and rc.n == 15 and rc.lam_min is None


def test_cli_unknown_subcommand():
    assert run_cli(["frobnicate"]) == 2


def test_cli_usage_errors(capsys):
    assert run_cli(["eigen", "--beta", "-1"]) == 2
    assert run_cli(["eigen", "--beta", "abc"]) == 2
    assert "--beta" in capsys.readouterr().err


def test_cli_numerical_failure(capsys):
    assert run_cli(["continue", "--model", "sg", "--beta", "0", "--n", "15", "--max-points", "2", "--pull-in"]) == 1
    assert "ContinuationError" in capsys.readouterr().err


def test_cli_continue_flags_fold(tmp_path):
    out = tmp_path / "branch.csv"
    assert run_cli(["continue", "--model", "small_gap", "--beta", "1", "--tau", "0", "--n", "31", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert sum(r["fold_flag"] == "1" for r in rows) == 1


def test_cli_evolve_reports_and_writes_ledger(tmp_path, capsys):
    out = tmp_path / "ledger.csv"
    code = run_cli(["evolve", "--model", "fb", "--eps", "0.3", "--lambda", "5", "--gamma", "0", "--T", "10",
                    "--n", "15", "--dt", "2e-3", "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert "touchdown at t =" in text or "completed to t =" in text
    assert out.read_text().splitlines()[0] == "t,min_u,E_total,kinetic,dissipation,balance_residual"


def test_cli_config_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "p.cfg"
    cfg.write_text("beta = 0\ntau = 4\n")
    assert run_cli(["eigen", "--config", str(cfg), "--tau", "1", "--n", "63"]) == 0
    mu = float(capsys.readouterr().out.split()[2])
    assert mu == pytest.approx(math.pi**2 / 4, rel=1e-3)


def test_cli_oracle_and_potential(tmp_path, capsys):
    assert run_cli(["oracle", "--lambda", "0.3", "--n", "31"]) == 0
    assert "fold_lambda = 0.350004119" in capsys.readouterr().out
    assert run_cli(["potential", "--n", "15", "--neta", "9", "--out", str(tmp_path / "pot")]) == 0
    assert (tmp_path / "pot.phi.csv").exists() and (tmp_path / "pot.psi.csv").exists()
