"""Quantitative checks of computed solutions: bounds, TV, q - rho, entropy, L1 stability."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import quad

from .errors import OutOfRangeError, SupportError
from .grid import tv_space, tv_spacetime

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


@dataclass(frozen=True)
class EntropyPair:
    """eta(rho) = int_0^rho r (1 + gamma v(r)) dr and its compatible flux psi."""

    params: object

    def _integrand_eta(self, r):
        return r * (1.0 + self.params.gamma * self.params.velocity(r))

    def _integrand_psi(self, r):
        v = self.params.velocity
        return self._integrand_eta(r) * (v(r) + r * v.derivative(r))

    def _integrate(self, fn, rho):
        rho = np.asarray(rho, dtype=float)
        nodes = 0.5 * rho[..., None] * (_GL_X + 1.0)
        return 0.5 * rho * (fn(nodes) * _GL_W).sum(axis=-1)

    def eta(self, rho):
        return self._integrate(self._integrand_eta, rho)

    def psi(self, rho):
        return self._integrate(self._integrand_psi, rho)


def _check_unit(rho):
    if not -1e-12 <= rho <= 1 + 1e-12:
        raise OutOfRangeError(f"entropy defined on [0, 1], got {rho}")


def entropy_eta(rho, params):
    _check_unit(rho)
    pair = EntropyPair(params)
    return quad(lambda r: float(pair._integrand_eta(r)), 0.0, rho, epsabs=1e-13, epsrel=1e-13)[0]


def entropy_psi(rho, params):
    _check_unit(rho)
    pair = EntropyPair(params)
    return quad(lambda r: float(pair._integrand_psi(r)), 0.0, rho, epsabs=1e-13, epsrel=1e-13)[0]


def _bump(r):
    inside = np.abs(r) < 1.0
    return np.where(inside, (1.0 - r * r) ** 3, 0.0)


@dataclass(frozen=True)
class BumpFunction:
    """phi(t, x) = b((t - t_c)/s_t) b((x - x_c)/s_x) with b(r) = (1 - r^2)^3 on |r| < 1."""

    t_c: float
    x_c: float
    s_t: float
    s_x: float

    def __call__(self, t, x):
        return _bump((np.asarray(t) - self.t_c) / self.s_t) * _bump((np.asarray(x) - self.x_c) / self.s_x)


def default_test_bank(grid, T, t0=0.0, n_centers=5, n_scales=4):
    """5 placements x 4 scales of C^2 bumps inside (t0, T) x interior."""
    L = grid.length
    xs = grid.x_left + L * np.linspace(0.35, 0.65, n_centers)
    ts = t0 + (T - t0) * np.linspace(0.35, 0.65, n_centers)
    bank = []
    for j in range(n_scales):
        frac = (j + 1) / n_scales
        for tc, xc in zip(ts, xs):
            s_t = 0.3 * (T - t0) * frac
            s_x = 0.3 * L * frac
            bank.append(BumpFunction(float(tc), float(xc), float(s_t), float(s_x)))
    return bank


def entropy_functionals(sol, params, bank):
    """Discrete  iint eta(rho) phi_t + psi(rho) phi_x  for every bump in ``bank``.

    Differences of phi are moved onto eta and psi by summation by parts (phi
    vanishes on the outer nodes), so constant states give exactly zero.
    """
    grid = sol.grid
    t = sol.times
    x = grid.centers
    t_lo, t_hi = t[0], t[-1]
    pair = EntropyPair(params)
    rho = np.clip(sol.rho, 0.0, 1.0)
    eta, psi = pair.eta(rho), pair.psi(rho)
    d_eta = np.diff(0.5 * (eta[1:] + eta[:-1]), axis=0)  # levels 1..N-2
    psi_mid = 0.5 * (psi[:, 1:] + psi[:, :-1])
    d_psi = np.diff(psi_mid, axis=1)  # cells 1..n-2
    wt = np.full(t.size, 1.0)
    wt[0] = wt[-1] = 0.5
    dt_mean = float(np.mean(np.diff(t)))
    out = []
    for phi in bank:
        if (phi.t_c - phi.s_t <= t_lo or phi.t_c + phi.s_t >= t_hi
                or phi.x_c - phi.s_x <= x[0] or phi.x_c + phi.s_x >= x[-1]):
            raise SupportError(f"test function {phi} touches the boundary of the computed region")
        P = phi(t[:, None], x[None, :])
        time_term = -(P[1:-1] * d_eta).sum() * grid.dx
        space_term = -((P[:, 1:-1] * d_psi).sum(axis=1) * wt).sum() * dt_mean
        out.append(float(time_term + space_term))
    return np.array(out)


def entropy_residual(sol, params, bank=None):
    if bank is None:
        bank = default_test_bank(sol.grid, sol.T, float(sol.times[0]))
    return float(entropy_functionals(sol, params, bank).min())


def _time_weights(times):
    w = np.zeros(times.size)
    d = np.diff(times)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def spacetime_integral(values, times, dx):
    """Trapezoid in time, midpoint (cell average) in space."""
    return float((_time_weights(times) * np.asarray(values).sum(axis=1)).sum() * dx)


def q_rho_l1(sol, epsilon):
    """(iint |q - rho|, value / (T epsilon))."""
    value = spacetime_integral(np.abs(sol.q - sol.rho), sol.times, sol.grid.dx)
    return value, value / (sol.T * epsilon)


def bounds_violation(sol, rho_min, rho_max):
    return float(max(0.0, sol.rho.max() - rho_max, rho_min - sol.rho.min()))


def tv_ratio(sol, rho_min, tv0):
    tv = tv_spacetime(sol.rho_field())
    scale = sol.T * (1.0 + 1.0 / rho_min) * tv0 if rho_min > 0 and tv0 > 0 else np.nan
    return tv, (tv / scale if scale and np.isfinite(scale) else 0.0 if tv == 0 else np.inf)


def resample(sol, times, grid=None):
    """rho of ``sol`` at ``times`` (linear in time), averaged onto a coarser ``grid``."""
    t = sol.times
    out = np.empty((len(times), sol.grid.n_cells))
    for j, tj in enumerate(times):
        k = int(np.clip(np.searchsorted(t, tj, side="right") - 1, 0, t.size - 2))
        a = 0.0 if t[k + 1] == t[k] else (tj - t[k]) / (t[k + 1] - t[k])
        a = min(max(a, 0.0), 1.0)
        out[j] = (1 - a) * sol.rho[k] + a * sol.rho[k + 1]
    if grid is not None and grid.n_cells != sol.grid.n_cells:
        factor = sol.grid.n_cells // grid.n_cells
        if factor * grid.n_cells != sol.grid.n_cells or abs(grid.x_left - sol.grid.x_left) > 1e-12:
            raise ValueError("reference grid must refine the target grid by an integer factor")
        out = out.reshape(len(times), grid.n_cells, factor).mean(axis=2)
    return out


def l1_spacetime_distance(sol_a, sol_b, n_times=101):
    """iint |rho_a - rho_b| on [0, T] x domain, on the coarser of the two grids."""
    coarse = sol_a.grid if sol_a.grid.n_cells <= sol_b.grid.n_cells else sol_b.grid
    T = min(sol_a.T, sol_b.T)
    times = np.linspace(float(sol_a.times[0]), T, n_times)
    a = resample(sol_a, times, coarse)
    b = resample(sol_b, times, coarse)
    return spacetime_integral(np.abs(a - b), times, coarse.dx)


@dataclass(frozen=True)
class StabilityResult:
    ratio: float
    initial_distance: float
    spacetime_distance: float
    normalized: float


def stability_ratio(sol1, sol2, rho01, rho02, T=None):
    """iint |rho1 - rho2| / ||rho01 - rho02||_L1, with the C(1 + TV1 + TV2) shape."""
    grid = sol1.grid
    d0 = float(np.abs(np.asarray(rho01) - np.asarray(rho02)).sum() * grid.dx)
    if d0 == 0.0:
        raise ZeroDivisionError("identical initial data: stability ratio undefined")
    d = l1_spacetime_distance(sol1, sol2) if T is None else _clip_distance(sol1, sol2, T)
    shape = 1.0 + tv_space(np.asarray(rho01)) + tv_space(np.asarray(rho02))
    return StabilityResult(d / d0, d0, d, (d / d0) / shape)


def _clip_distance(sol1, sol2, T):
    times = np.linspace(float(sol1.times[0]), T, 101)
    return spacetime_integral(np.abs(resample(sol1, times) - resample(sol2, times)), times, sol1.grid.dx)


@dataclass(frozen=True)
class DiagnosticsReport:
    bounds_violation: float
    tv_spacetime: float
    tv_ratio: float
    q_rho_l1: float
    q_rho_ratio: float
    entropy_min: float
    stability_ratio: float = float("nan")

    def to_dict(self):
        return asdict(self)


def diagnose(sol, params, rho_min, rho_max, tv0, bank=None):
    tv, ratio = tv_ratio(sol, rho_min, tv0)
    if params.kernel.kind == "exponential" and sol.solver != "lwr":
        qr, qr_ratio = q_rho_l1(sol, params.kernel.epsilon)
    else:
        qr, qr_ratio = (q_rho_l1(sol, 1.0)[0], float("nan")) if sol.solver != "lwr" else (0.0, 0.0)
    return DiagnosticsReport(
        bounds_violation=bounds_violation(sol, rho_min, rho_max),
        tv_spacetime=tv,
        tv_ratio=ratio,
        q_rho_l1=qr,
        q_rho_ratio=qr_ratio,
        entropy_min=entropy_residual(sol, params, bank),
    )
