"""Acceptance suite: one test and one printed PASS/FAIL line per criterion.

Run with ``pytest -s tests/test_acceptance.py`` to see the verdict lines.
"""
import numpy as np
import pytest

from nonlocal_traffic import experiments as ex
from nonlocal_traffic.cli import main
from nonlocal_traffic.config import RunConfig, SweepConfig
from nonlocal_traffic.diagnostics import diagnose, entropy_residual
from nonlocal_traffic.grid import Grid1D, SpaceTimeField
from nonlocal_traffic.lwr import rarefaction_exact, solve_lwr
from nonlocal_traffic.model import KernelSpec, ModelParams, admissibility, greenshields
from nonlocal_traffic.quadrature import compute_dy_q, compute_q_exponential

# pinned tolerances
CONST_TOL = 1e-10
DIAG_ZERO_TOL = 1e-12
BOUNDS_SLACK = 1e-3          # tol_b = 1e-3 + 2 dx
HALVING = (1.7, 2.3)
BAND_MAX = 3.0
TVD_C_BAND = 2.0
LIMIT_REDUCTION = 2.0
ENTROPY_C_BAND = 2.0
STABILITY_BAND = 2.0
SHOCK_DRIFT_CELLS = 2.0
RAREFACTION_L1 = 0.02
IDENTITY_RATIO = 1.7

EPSILONS = (0.1, 0.05, 0.025, 0.0125)
GRIDS = (200, 400, 800)


def verdict(number, title, ok, detail):
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail}")
    assert ok, detail


def band(values):
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min())


@pytest.fixture(scope="module")
def eps_rows():
    base = RunConfig(scenario="bump", gamma=0.1, x_left=-4.0, x_right=4.0, n_cells=200, T=1.0,
                     solver="relaxation")
    return ex.sweep_epsilon_rows(SweepConfig(base, values=EPSILONS), workers=4)


def test_c01_constant_states():
    worst, diag_worst = 0.0, 0.0
    for c in (0.1, 0.3, 0.7):
        for solver in ("characteristics", "relaxation", "lwr"):
            cfg = RunConfig(scenario="constant", scenario_params=(("value", c),), solver=solver,
                            n_cells=100, T=1.0)
            sol, params, grid, rho0 = ex.solve(cfg)
            worst = max(worst, float(np.abs(sol.rho - c).max()))
            if solver != "lwr":
                rep = diagnose(sol, params, c, c, 0.0)
                vals = [rep.bounds_violation, rep.tv_spacetime, rep.q_rho_l1, abs(rep.entropy_min)]
                diag_worst = max(diag_worst, *vals)
    ok = worst <= CONST_TOL and diag_worst <= DIAG_ZERO_TOL
    verdict(1, "constant states", ok, f"max |rho - c| = {worst:.2e}, max diagnostic = {diag_worst:.2e}")


def test_c02_maximum_principle():
    lines, ok = [], True
    for scenario in ("bump", "smoothed-riemann"):
        for solver in ("characteristics", "relaxation"):
            viol = []
            for n in GRIDS:
                cfg = RunConfig(scenario=scenario, solver=solver, n_cells=n, T=1.0)
                sol, params, grid, rho0 = ex.solve(cfg)
                rep = admissibility(params, rho0, grid)
                lo = np.clip(sol.rho - rep.rho_min, None, 0.0)
                hi = np.clip(sol.rho - rep.rho_max, 0.0, None)
                v = float(max(-lo.min(), hi.max())) + 0.0
                ok &= v <= BOUNDS_SLACK + 2 * grid.dx
                viol.append(v)
            ok &= all(b <= a for a, b in zip(viol, viol[1:]))
            lines.append(f"{scenario}/{solver} " + ",".join(f"{v:.1e}" for v in viol))
    verdict(2, "maximum principle", ok, "; ".join(lines))


def test_c03_cross_solver():
    base = RunConfig(scenario="bump", epsilon=0.1, gamma=0.1, T=0.5, output_times=(0.0, 0.5))
    rows = ex.compare_solvers_rows(SweepConfig(base, axis="grid", values=GRIDS), workers=4)
    ratios = [r["ratio_to_previous"] for r in rows[1:]]
    ok = all(HALVING[0] <= r <= HALVING[1] for r in ratios)
    verdict(3, "cross-solver halving", ok,
            "L1 " + ", ".join(f"{r['L1_difference']:.3e}" for r in rows) + " ratios "
            + ", ".join(f"{r:.3f}" for r in ratios))


def test_c04_q_rho_estimate(eps_rows):
    ratios = [r["q_rho_ratio"] for r in eps_rows]
    verdict(4, "q - rho estimate", band(ratios) <= BAND_MAX,
            "ratios " + ", ".join(f"{r:.3f}" for r in ratios) + f" band {band(ratios):.3f}")


def test_c05_uniform_bv(eps_rows):
    tv = [r["tv_spacetime"] for r in eps_rows]
    verdict(5, "uniform BV", band(tv) <= BAND_MAX,
            "TV " + ", ".join(f"{r:.4f}" for r in tv) + f" band {band(tv):.3f}")


def test_c06_tvd_riemann_invariants():
    consts = []
    for n in GRIDS:
        cfg = RunConfig(scenario="bump", solver="relaxation", n_cells=n, T=1.0)
        sol, params, grid, rho0 = ex.solve(cfg)
        inc = max(r["increase"] for r in sol.telemetry["tvd"])
        consts.append(max(inc, 0.0) / (grid.dx * sol.dt))
    nonzero = [c for c in consts if c > 0]
    ok = all(np.isfinite(consts)) and (len(nonzero) == 0 or
                                       (len(nonzero) == len(consts) and band(consts) <= TVD_C_BAND))
    verdict(6, "TVD of Riemann invariants", ok, "C per grid " + ", ".join(f"{c:.3e}" for c in consts))


def test_c07_local_limit(eps_rows):
    l1 = [r["L1_error"] for r in eps_rows]
    decreasing = all(b < a for a, b in zip(l1, l1[1:]))
    reduction = l1[0] / l1[-1]
    verdict(7, "nonlocal-to-local limit", decreasing and reduction >= LIMIT_REDUCTION,
            "L1 " + ", ".join(f"{v:.4f}" for v in l1) + f" reduction {reduction:.3f}")


def test_c08_entropy(eps_rows):
    cfits = [r["entropy_C"] for r in eps_rows]
    mins = [r["entropy_min"] for r in eps_rows]
    cfg = RunConfig(scenario="constant", n_cells=100, T=1.0)
    sol, params, *_ = ex.solve(cfg)
    const_value = entropy_residual(sol, params)
    if all(m >= 0 for m in mins):
        fit_ok = True
    else:
        fit_ok = min(cfits) > 0 and band(cfits) <= ENTROPY_C_BAND
    ok = fit_ok and const_value == 0.0
    verdict(8, "entropy residual", ok,
            "min " + ", ".join(f"{m:.2e}" for m in mins) + " fitted C "
            + ", ".join(f"{c:.2e}" for c in cfits) + f" constant state {abs(const_value)!r}")


def test_c09_l1_stability():
    base = RunConfig(scenario="bump", T=1.0, n_cells=200)
    sweep = SweepConfig(base, perturbation_kinds=("shift", "amplitude"), perturbation_sizes=(1e-2, 1e-3),
                        solvers=("characteristics", "relaxation"))
    rows = ex.stability_rows(sweep, workers=4)
    groups = {}
    for r in rows:
        groups.setdefault(f"{r['solver']}/{r['kind']}", []).append(r["ratio"])
    ok = all(band(v) <= STABILITY_BAND for v in groups.values())
    verdict(9, "L1 stability", ok,
            "; ".join(f"{k} " + ",".join(f"{x:.4f}" for x in v) for k, v in groups.items()))


def test_c10_lwr_reference():
    v = greenshields()
    grid = Grid1D.from_interval(-2.0, 2.0, 400, (0.2, 0.8))
    x = grid.centers
    sol = solve_lwr(np.where(x < 0, 0.2, 0.8), 1.0, grid, v)
    mass_shift = (sol.rho[-1] - sol.rho[0]).sum() * grid.dx / (0.8 - 0.2)
    drift = abs(mass_shift)
    # front position from the 0.5 crossing as a second measure
    k = int(np.argmax(sol.rho[-1] >= 0.5))
    xf = x[k - 1] + (0.5 - sol.rho[-1][k - 1]) / (sol.rho[-1][k] - sol.rho[-1][k - 1]) * grid.dx
    drift = max(drift, abs(xf))

    fine = Grid1D.from_interval(-2.0, 2.0, 800, (0.8, 0.2))
    xr = fine.centers
    rare = solve_lwr(np.where(xr < 0, 0.8, 0.2), 1.0, fine, v)
    err = float(np.abs(rare.rho[-1] - rarefaction_exact(xr, 1.0, 0.8, 0.2, v)).sum() * fine.dx)
    ok = drift <= SHOCK_DRIFT_CELLS * grid.dx and err <= RAREFACTION_L1
    verdict(10, "LWR reference", ok,
            f"shock drift {drift:.2e} (2dx = {2 * grid.dx:.2e}), rarefaction L1 {err:.2e}")


def _identity_residual(n, T=0.5, eps=0.1, gamma=0.1):
    grid = Grid1D.from_interval(-4, 4, n, (0.4, 0.4))
    steps = int(np.ceil(T / (0.5 * grid.dx)))
    dt = T / steps
    t = dt * np.arange(steps + 1)
    x = grid.centers
    field = SpaceTimeField(grid, 0.0, dt, 0.4 + 0.2 * np.exp(-(x[None, :] - 0.5 * t[:, None]) ** 2))
    params = ModelParams(gamma, KernelSpec.exponential(eps), greenshields())
    q = compute_q_exponential(field, T, params)
    dyq = compute_dy_q(field, T, params)
    return float(np.abs(dyq - (q - field.values[-1]) / eps).max())


def test_c11_exponential_identity():
    res = [_identity_residual(n) for n in (100, 200, 400, 800)]
    ratios = [a / b for a, b in zip(res, res[1:])]
    ok = all(r >= IDENTITY_RATIO for r in ratios)
    verdict(11, "exponential quadrature identity", ok,
            "residual " + ", ".join(f"{r:.3e}" for r in res) + " ratios " + ", ".join(f"{r:.2f}" for r in ratios))


def _tree(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def test_c12_reproducibility(tmp_path):
    ini = tmp_path / "cfg.ini"
    ini.write_text("[scenario]\nname = bump\n[grid]\nx_left = -4\nx_right = 4\nn_cells = 100\n"
                   "[run]\nT = 0.5\noutput_times = 0, 0.25, 0.5\n"
                   "[sweep]\nepsilon_values = 0.1, 0.05, 0.025\ngamma_values = 0.1, 0.05\n"
                   "grid_values = 50, 100\n[stability]\nsizes = 1e-2, 1e-3\n")
    same = []
    for cmd in ("run", "sweep-epsilon", "sweep-gamma", "stability", "compare-solvers"):
        trees = []
        for tag, workers in (("a", "1"), ("b", "1"), ("c", "8")):
            out = tmp_path / f"{cmd}-{tag}"
            argv = [cmd, "--config", str(ini), "--out", str(out)]
            if cmd != "run":
                argv += ["--workers", workers]
            assert main(argv) == 0
            trees.append(_tree(out))
        same.append(trees[0] == trees[1] == trees[2] and len(trees[0]) > 0)
    verdict(12, "reproducibility", all(same),
            f"{sum(same)}/{len(same)} commands byte-identical across reruns and --workers 1 vs 8")
