import csv
import json

import numpy as np
import pytest

from nonlocal_traffic import experiments as ex
from nonlocal_traffic.cli import main
from nonlocal_traffic.config import RunConfig, SweepConfig

SMALL = dict(x_left=-4.0, x_right=4.0, n_cells=80, T=0.5, output_times=(0.0, 0.25, 0.5))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_constant_state_all_zero(tmp_path):
    cfg = RunConfig(scenario="constant", scenario_params=(("value", 0.3),), **SMALL)
    out = ex.run(cfg, tmp_path / "c")
    diag = read_csv(out / "diagnostics.csv")[0]
    for key in ("tv_spacetime", "entropy_min", "bounds_violation"):
        assert float(diag[key]) == 0.0
    assert float(diag["q_rho_l1"]) <= 1e-14


def test_run_bump_snapshot_contract(tmp_path):
    cfg = RunConfig(scenario="bump", epsilon=0.05, solver="relaxation", x_left=-4, x_right=4, n_cells=80)
    out = ex.run(cfg, tmp_path / "b")
    rows = read_csv(out / "snapshots.csv")
    assert sorted({float(r["t"]) for r in rows}) == [0.0, 0.5, 1.0]
    assert len(rows) == 3 * 80
    assert {r["config_hash"] for r in rows} == {cfg.config_hash()}
    meta = json.loads((out / "params.json").read_text())
    assert meta["schema_version"] == 1 and meta["config_hash"] == cfg.config_hash()
    for name in ("telemetry.json", "checks.json", "tvd.csv", "snapshots.dat", "plot.gp"):
        assert (out / name).exists()
    checks = json.loads((out / "checks.json").read_text())["checks"]
    assert checks["max_principle"]["pass"]


@pytest.mark.parametrize("solver", ["characteristics", "relaxation", "lwr"])
def test_run_bit_identical(tmp_path, solver):
    cfg = RunConfig(solver=solver, **SMALL)
    a = ex.run(cfg, tmp_path / "a")
    b = ex.run(cfg, tmp_path / "b")
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_sweeps_on_constant_state_are_zero():
    base = RunConfig(scenario="constant", **SMALL)
    rows = ex.sweep_epsilon_rows(SweepConfig(base, values=(0.1, 0.05)))
    assert all(r["L1_error"] <= 1e-12 for r in rows)
    rows = ex.compare_gamma_zero_rows(SweepConfig(base, axis="gamma", values=(0.1, 0.05)))
    assert all(r["L1_distance"] <= 1e-12 for r in rows)


def test_gamma_zero_mode_against_itself():
    base = RunConfig(**SMALL).with_(gamma=0.0)
    a = ex._gamma_member(base)
    b = ex._gamma_member(base)
    from nonlocal_traffic.diagnostics import l1_spacetime_distance
    assert l1_spacetime_distance(a, b) == 0.0


def test_sweep_rows_independent_of_workers():
    sw = SweepConfig(RunConfig(**SMALL), values=(0.1, 0.05))
    assert ex.sweep_epsilon_rows(sw, workers=1) == ex.sweep_epsilon_rows(sw, workers=2)


def test_perturbations():
    cfg = RunConfig(**SMALL)
    base = cfg.initial_density()
    shifted = ex.perturbed_density(cfg, "shift", 0.01)
    bumped = ex.perturbed_density(cfg, "amplitude", 0.01)
    assert 0 < np.abs(shifted - base).max() < 0.01
    assert np.abs(bumped - base).max() == pytest.approx(0.01, rel=1e-2)


def _write_ini(tmp_path, extra=""):
    path = tmp_path / "cfg.ini"
    path.write_text("[scenario]\nname = bump\n[grid]\nx_left = -4\nx_right = 4\nn_cells = 80\n"
                    "[run]\nT = 0.5\noutput_times = 0, 0.5\n" + extra)
    return path


def test_cli_exit_codes(tmp_path, capsys):
    ini = _write_ini(tmp_path)
    assert main(["validate", "--config", str(ini)]) == 0
    assert json.loads(capsys.readouterr().out)["ok"] is True
    assert main(["validate", "--config", str(ini), "--override", "model.gamma=0.5"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == 2 and "smallness condition" in err["message"]
    assert main(["run", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "o")]) == 4
    assert main(["run", "--config", str(ini), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "snapshots.csv").exists()
    assert main(["run", "--config", str(ini), "--out", str(tmp_path / "p"),
                 "--override", "picard.max_iters=1", "--override", "picard.tol=1e-15",
                 "--override", "run.solver=characteristics"]) == 3


def test_cli_sweeps_write_tables(tmp_path):
    ini = _write_ini(tmp_path, "[sweep]\nepsilon_values = 0.1, 0.05\ngamma_values = 0.1, 0.05\n"
                               "grid_values = 40, 80\n[stability]\nsizes = 1e-2, 1e-3\nsolvers = relaxation\n")
    for cmd, name in [("sweep-epsilon", "sweep_epsilon"), ("sweep-gamma", "sweep_gamma"),
                      ("stability", "stability"), ("compare-solvers", "compare_solvers")]:
        out = tmp_path / cmd
        assert main([cmd, "--config", str(ini), "--out", str(out)]) == 0
        rows = read_csv(out / f"{name}.csv")
        assert rows and all(len(r["config_hash"]) == 64 for r in rows)
        meta = json.loads((out / f"{name}.json").read_text())
        assert meta["schema_version"] == 1 and "checks" in meta
