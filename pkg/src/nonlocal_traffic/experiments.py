"""Single runs, parameter sweeps and their artifacts.

Sweep members are independent; they run in a process pool and are merged in
configured order, so tables do not depend on the pool size.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import artifacts as art
from .characteristics import solve_characteristics
from .config import validate
from .diagnostics import diagnose, l1_spacetime_distance, stability_ratio
from .grid import tv_space
from .lwr import solve_lwr
from .relaxation import CFL_MAX, solve_relaxation

BOUNDS_SLACK = 1e-3
ENTROPY_C_REF = 0.05
BAND_MAX = 3.0
STABILITY_BAND = 2.0
HALVING_BAND = (1.7, 2.3)


def map_ordered(fn, items, workers=1):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def solve(config, rho0=None, check=True):
    """Solve ``config`` and return (solution, params, grid, rho0)."""
    params = config.params()
    grid = config.grid()
    if rho0 is None:
        rho0 = config.initial_density(grid)
    if config.solver == "characteristics":
        sol = solve_characteristics(rho0, grid, params, config.T, config.picard(), check=check)
    elif config.solver == "relaxation":
        sol = solve_relaxation(rho0, grid, params, config.T, cfl=config.cfl or CFL_MAX, check=check)
    else:
        sol = solve_lwr(rho0, config.T, grid, params.velocity, cfl=config.cfl or 0.9)
    return sol, params, grid, rho0


def snapshot(sol, t):
    """(rho, q) at time t, linear between stored levels."""
    times = sol.times
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 2))
    a = float(np.clip((t - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0))
    if abs(a) < 1e-9:
        a = 0.0
    elif abs(a - 1) < 1e-9:
        a = 1.0
    return ((1 - a) * sol.rho[k] + a * sol.rho[k + 1], (1 - a) * sol.q[k] + a * sol.q[k + 1])


def _run_checks(report, config, grid):
    dx = grid.dx
    out = {
        "max_principle": {"value": report.bounds_violation, "threshold": BOUNDS_SLACK + 2 * dx,
                          "pass": report.bounds_violation <= BOUNDS_SLACK + 2 * dx},
        "uniform_bv": {"value": report.tv_ratio, "pass": bool(np.isfinite(report.tv_ratio))},
    }
    if config.solver != "lwr" and config.kernel_kind == "exponential":
        out["q_rho_estimate"] = {"value": report.q_rho_ratio, "pass": bool(np.isfinite(report.q_rho_ratio))}
        bound = -ENTROPY_C_REF * (config.epsilon + dx)
        out["entropy_inequality"] = {"value": report.entropy_min, "threshold": bound,
                                     "pass": report.entropy_min >= bound}
    return out


def measure(config, sol, params, grid, rho0, admiss):
    tv0 = tv_space(rho0)
    return diagnose(sol, params, admiss.rho_min, admiss.rho_max, tv0)


DIAG_COLUMNS = ["config_hash", "scenario", "solver", "epsilon", "gamma", "n_cells", "dx", "dt", "T",
                "rho_min", "rho_max", "bounds_violation", "tv_spacetime", "tv_ratio", "q_rho_l1",
                "q_rho_ratio", "entropy_min"]
SNAPSHOT_COLUMNS = ["config_hash", "t", "x", "rho", "q"]
TVD_COLUMNS = ["config_hash", "t", "TV_u", "TV_h", "increase", "violation"]


def run(config, out_dir=None):
    """Validate, solve, diagnose and write the run directory. Returns its path."""
    out = art.ensure_dir(out_dir or config.out_dir or "run_out")
    admiss = validate(config)
    sol, params, grid, rho0 = solve(config, check=False)
    report = measure(config, sol, params, grid, rho0, admiss)
    h = config.config_hash()
    cfg = config.to_dict()
    cfg.pop("out_dir")
    derived = {"dx": grid.dx, "dt": sol.dt, "n_levels": int(sol.times.size), "grid": grid.describe(),
               "kernel": params.kernel.describe(), "admissibility": admiss.to_dict()}
    art.write_json(out / "params.json", art.sidecar("run", cfg, h, {"derived": derived}))

    x = grid.centers
    rows, blocks = [], []
    for t in config.output_times:
        r, q = snapshot(sol, t)
        rows.extend({"config_hash": h, "t": float(t), "x": float(xi), "rho": float(ri), "q": float(qi)}
                    for xi, ri, qi in zip(x, r, q))
        blocks.append((f"t = {float(t)!r}", [x, r, q]))
    art.write_csv(out / "snapshots.csv", SNAPSHOT_COLUMNS, rows)
    art.write_dat(out / "snapshots.dat", blocks, ["x", "rho", "q"])
    (out / "plot.gp").write_text(art.snapshot_plot_script(
        "snapshots.dat", [f"t={t:g}" for t in config.output_times], f"{config.scenario} / {config.solver}"))

    diag = dict(report.to_dict(), config_hash=h, scenario=config.scenario, solver=config.solver,
                epsilon=config.epsilon, gamma=config.gamma, n_cells=config.n_cells, dx=grid.dx,
                dt=sol.dt, T=config.T, rho_min=admiss.rho_min, rho_max=admiss.rho_max)
    art.write_csv(out / "diagnostics.csv", DIAG_COLUMNS, [diag])
    art.write_json(out / "checks.json", {"config_hash": h, "checks": _run_checks(report, config, grid)})
    art.write_json(out / "telemetry.json", dict(sol.telemetry, config_hash=h))
    if config.solver == "relaxation":
        art.write_csv(out / "tvd.csv", TVD_COLUMNS,
                      [dict(row, config_hash=h) for row in sol.telemetry.get("tvd", [])])
    return out


# -- sweeps ---------------------------------------------------------------------

def _epsilon_member(task):
    config, ref = task
    admiss = validate(config)
    sol, params, grid, rho0 = solve(config, check=False)
    rep = measure(config, sol, params, grid, rho0, admiss)
    l1 = l1_spacetime_distance(sol, ref)
    c_fit = max(0.0, -rep.entropy_min) / (config.epsilon + grid.dx)
    return {"config_hash": config.config_hash(), "epsilon": config.epsilon, "n_cells": config.n_cells,
            "L1_error": l1, "tv_spacetime": rep.tv_spacetime, "tv_ratio": rep.tv_ratio,
            "q_rho_l1": rep.q_rho_l1, "q_rho_ratio": rep.q_rho_ratio, "entropy_min": rep.entropy_min,
            "entropy_C": c_fit, "bounds_violation": rep.bounds_violation,
            "max_tvd_increase": max((r["increase"] for r in sol.telemetry.get("tvd", [])), default=0.0)}


EPSILON_COLUMNS = ["config_hash", "epsilon", "n_cells", "L1_error", "tv_spacetime", "tv_ratio", "q_rho_l1",
                   "q_rho_ratio", "entropy_min", "entropy_C", "bounds_violation", "max_tvd_increase"]


def _band(values):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0 or v.min() <= 0:
        return float("inf") if v.size and v.max() > 0 else 1.0
    return float(v.max() / v.min())


def _strictly_decreasing(values):
    return bool(np.all(np.diff(np.asarray(values, dtype=float)) < 0))


def reference_lwr(config, factor):
    ref_cfg = config.with_(solver="lwr", n_cells=config.n_cells * factor, cfl=None)
    sol, *_ = solve(ref_cfg)
    return sol


def sweep_epsilon_rows(sweep, workers=1):
    if sweep.axis != "epsilon":
        raise ValueError("sweep_epsilon needs axis = epsilon")
    if sweep.target != "lwr-fine-grid":
        raise ValueError("sweep_epsilon compares against target = lwr-fine-grid")
    ref = reference_lwr(sweep.base, sweep.reference_factor)
    return map_ordered(_epsilon_member, [(m, ref) for m in sweep.members()], workers)


def epsilon_checks(rows):
    l1 = [r["L1_error"] for r in rows]
    all_zero = max(l1) < 1e-12
    reduction = l1[0] / l1[-1] if l1[-1] > 0 else float("inf")
    return {
        "local_limit": {"L1_error": l1, "end_to_end_reduction": reduction,
                        "pass": all_zero or (_strictly_decreasing(l1) and reduction >= 2.0)},
        "q_rho_estimate": {"band": _band([r["q_rho_ratio"] for r in rows]), "threshold": BAND_MAX,
                           "pass": _band([r["q_rho_ratio"] for r in rows]) <= BAND_MAX},
        "uniform_bv": {"band": _band([r["tv_spacetime"] for r in rows]), "threshold": BAND_MAX,
                       "pass": _band([r["tv_spacetime"] for r in rows]) <= BAND_MAX},
        "entropy_inequality": {"band": _band([r["entropy_C"] for r in rows]), "threshold": 2.0,
                               "pass": _band([r["entropy_C"] for r in rows]) <= 2.0},
    }


def sweep_epsilon(sweep, out_dir=None, workers=1):
    rows = sweep_epsilon_rows(sweep, workers)
    _write_table(sweep, out_dir, "sweep_epsilon", EPSILON_COLUMNS, rows, epsilon_checks(rows),
                 "epsilon", "L1_error")
    return rows


def _gamma_member(config):
    sol, *_ = solve(config.with_(solver="characteristics"))
    return sol


def compare_gamma_zero_rows(sweep, workers=1):
    """L1 distance between the delayed model and its gamma = 0 counterpart.

    Both sides use the characteristics solver; with gamma = 0 the look-ahead
    path stays on the current time level.
    """
    if sweep.axis != "gamma":
        raise ValueError("compare_gamma_zero needs axis = gamma")
    members = sweep.members()
    zero = sweep.base.with_(gamma=0.0)
    sols = map_ordered(_gamma_member, [zero] + members, workers)
    ref = sols[0]
    rows = []
    for cfg, sol in zip(members, sols[1:]):
        rows.append({"config_hash": cfg.config_hash(), "gamma": cfg.gamma,
                     "L1_distance": l1_spacetime_distance(sol, ref)})
    return rows


GAMMA_COLUMNS = ["config_hash", "gamma", "L1_distance"]


def gamma_checks(rows):
    d = [r["L1_distance"] for r in rows]
    ok = max(d) < 1e-12 or _strictly_decreasing(d)
    return {"gamma_zero_limit": {"L1_distance": d, "pass": ok}}


def compare_gamma_zero(sweep, out_dir=None, workers=1):
    rows = compare_gamma_zero_rows(sweep, workers)
    _write_table(sweep, out_dir, "sweep_gamma", GAMMA_COLUMNS, rows, gamma_checks(rows), "gamma", "L1_distance")
    return rows


def perturbed_density(config, kind, size, grid=None):
    grid = grid or config.grid()
    scen = config.scenario_obj()
    params = dict(config.scenario_params)
    x = grid.centers
    if kind == "shift":
        return scen.density(x - size, params)
    mid = 0.5 * (config.x_left + config.x_right)
    return scen.density(x, params) + size * np.exp(-(x - mid) ** 2)


def _stability_member(task):
    config, kind, size = task
    grid = config.grid()
    rho01 = config.initial_density(grid)
    rho02 = perturbed_density(config, kind, size, grid)
    sol1, *_ = solve(config)
    sol2, *_ = solve(config, rho0=rho02)
    res = stability_ratio(sol1, sol2, rho01, rho02)
    return {"config_hash": config.config_hash(), "solver": config.solver, "kind": kind, "size": size,
            "initial_distance": res.initial_distance, "spacetime_distance": res.spacetime_distance,
            "ratio": res.ratio, "normalized": res.normalized}


STABILITY_COLUMNS = ["config_hash", "solver", "kind", "size", "initial_distance", "spacetime_distance",
                     "ratio", "normalized"]


def stability_rows(sweep, workers=1):
    tasks = [(sweep.base.with_(solver=s), k, float(z))
             for s in sweep.solvers for k in sweep.perturbation_kinds for z in sweep.perturbation_sizes]
    return map_ordered(_stability_member, tasks, workers)


def stability_checks(rows):
    groups = {}
    for r in rows:
        groups.setdefault(f"{r['solver']}/{r['kind']}", []).append(r["ratio"])
    detail = {key: {"ratios": v, "band": _band(v), "pass": _band(v) <= STABILITY_BAND}
              for key, v in groups.items()}
    return {"l1_stability": {"groups": detail, "threshold": STABILITY_BAND,
                             "pass": all(d["pass"] for d in detail.values())}}


def stability(sweep, out_dir=None, workers=1):
    rows = stability_rows(sweep, workers)
    _write_table(sweep, out_dir, "stability", STABILITY_COLUMNS, rows, stability_checks(rows), None, None)
    return rows


def _solver_member(config):
    sol, *_ = solve(config)
    return sol


def compare_solvers_rows(sweep, workers=1):
    """Characteristics against relaxation on each grid of the sweep."""
    if sweep.axis != "grid":
        raise ValueError("compare_solvers needs axis = grid")
    members = sweep.members()
    tasks = [m.with_(solver=s) for m in members for s in ("characteristics", "relaxation")]
    sols = map_ordered(_solver_member, tasks, workers)
    rows, prev = [], None
    for i, cfg in enumerate(members):
        a, b = sols[2 * i], sols[2 * i + 1]
        d = l1_spacetime_distance(a, b)
        rows.append({"config_hash": cfg.config_hash(), "n_cells": cfg.n_cells, "dx": a.grid.dx,
                     "dt_characteristics": a.dt, "dt_relaxation": b.dt, "L1_difference": d,
                     "ratio_to_previous": (prev / d if prev is not None and d > 0 else float("nan"))})
        prev = d
    return rows


SOLVER_COLUMNS = ["config_hash", "n_cells", "dx", "dt_characteristics", "dt_relaxation", "L1_difference",
                  "ratio_to_previous"]


def solver_checks(rows):
    ratios = [r["ratio_to_previous"] for r in rows[1:]]
    lo, hi = HALVING_BAND
    return {"cross_solver": {"ratios": ratios, "band": list(HALVING_BAND),
                             "pass": bool(ratios) and all(lo <= r <= hi for r in ratios)}}


def compare_solvers(sweep, out_dir=None, workers=1):
    rows = compare_solvers_rows(sweep, workers)
    _write_table(sweep, out_dir, "compare_solvers", SOLVER_COLUMNS, rows, solver_checks(rows),
                 "n_cells", "L1_difference")
    return rows


def _write_table(sweep, out_dir, name, columns, rows, checks, x_col, y_col):
    if out_dir is None:
        return None
    out = art.ensure_dir(out_dir)
    h = sweep.config_hash()
    cfg = sweep.to_dict()
    cfg["base"].pop("out_dir")
    art.write_csv(out / f"{name}.csv", columns, rows)
    art.write_json(out / f"{name}.json", art.sidecar(name, cfg, h, {
        "columns": columns, "row_hashes": [r["config_hash"] for r in rows], "checks": checks}))
    if x_col is not None:
        art.write_dat(out / f"{name}.dat", [(name, [[r[x_col] for r in rows], [r[y_col] for r in rows]])],
                      [x_col, y_col])
        (out / f"{name}.gp").write_text(art.table_plot_script(f"{name}.dat", x_col, y_col, f"{name}.png"))
    return Path(out)
