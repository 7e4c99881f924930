"""Finite-volume solver for the exponential-kernel relaxation system

    rho_t + (rho v(q))_x = 0,
    q_t - q_x / gamma    = (rho - q) / (gamma epsilon),

with Strang splitting: exact half-step relaxation of q, upwind transport of
both fields, exact half-step relaxation again.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, CFLError, KernelKindError, OutOfRangeError, PositivityError
from .grid import SpaceTimeSolution
from .model import admissibility
from .quadrature import look_ahead_average

CFL_MAX = 0.9
POSITIVITY_TOL = 1e-6


@dataclass
class RelaxState:
    rho: np.ndarray
    q: np.ndarray

    def copy(self):
        return RelaxState(self.rho.copy(), self.q.copy())


@dataclass
class RiemannInvariants:
    u: np.ndarray
    h: np.ndarray

    @property
    def total_variation(self):
        return float(np.abs(np.diff(self.u)).sum() + np.abs(np.diff(self.h)).sum())


@dataclass(frozen=True)
class TVDReport:
    tv_old: float
    tv_new: float
    increase: float
    slack: float
    violation: float


def relaxation_cfl(dt, dx, params):
    return dt * max(1.0 / params.gamma, params.velocity.v_max) / dx


def stable_dt(dx, params, cfl=CFL_MAX):
    return cfl * dx / max(1.0 / params.gamma, params.velocity.v_max)


def relax_source(state, tau, params):
    """q <- rho + (q - rho) exp(-tau / (gamma epsilon)); rho unchanged."""
    decay = np.exp(-tau / (params.gamma * params.kernel.epsilon))
    return RelaxState(state.rho, state.rho + (state.q - state.rho) * decay)


def upwind_transport(state, dt, grid, params):
    """One upwind step: rho flux rho_i v(q_{i+1}), q advected leftward."""
    left, right = grid.extension
    lam = dt / grid.dx
    q_ext = np.append(state.q, right)
    rho_ext = np.concatenate([[left], state.rho])
    flux = rho_ext * params.velocity(q_ext)  # interfaces i-1/2, i = 0..n
    rho = state.rho - lam * (flux[1:] - flux[:-1])
    q = state.q + (lam / params.gamma) * (q_ext[1:] - state.q)
    return RelaxState(rho, q)


def step_relaxation(state, dt, grid, params):
    """One Strang-split step of the relaxation system."""
    if params.kernel.kind != "exponential":
        raise KernelKindError("the relaxation form exists only for exponential kernels")
    if params.gamma <= 0:
        raise CFLError("the relaxation system needs gamma > 0")
    cfl = relaxation_cfl(dt, grid.dx, params)
    if cfl > CFL_MAX + 1e-12:
        raise CFLError(f"CFL number {cfl:.4f} exceeds {CFL_MAX}")
    state = relax_source(state, 0.5 * dt, params)
    state = upwind_transport(state, dt, grid, params)
    state = relax_source(state, 0.5 * dt, params)
    lo = min(state.rho.min(), state.q.min())
    hi = max(state.rho.max(), state.q.max())
    if lo < -POSITIVITY_TOL or hi > 1 + POSITIVITY_TOL:
        raise PositivityError(f"state left [0, 1] beyond tolerance: range [{lo:.3e}, {hi:.6f}]")
    return state


def riemann_invariants(state, params):
    """u = ln(rho (1 + gamma v(q))), h = -ln(1 + gamma v(q))."""
    rho = np.asarray(state.rho, dtype=float)
    if np.any(rho <= 0):
        raise OutOfRangeError("Riemann invariants need strictly positive density")
    one_plus = 1.0 + params.gamma * params.velocity(np.asarray(state.q, dtype=float))
    return RiemannInvariants(u=np.log(rho * one_plus), h=-np.log(one_plus))


def q_of_h(h, params):
    """Inverse relation q(h) = v^{-1}((exp(-h) - 1) / gamma)."""
    speed = (np.exp(-np.asarray(h, dtype=float)) - 1.0) / params.gamma
    return params.velocity.inverse(np.clip(speed, 0.0, params.velocity.v_max))


def source_Lambda(u, h, params):
    """Source rate of the diagonal system: v'(q(h)) e^h (e^{u+h} - q(h))."""
    qh = q_of_h(h, params)
    return params.velocity.derivative(qh) * np.exp(h) * (np.exp(u + h) - qh)


def dLambda_du(u, h, params):
    qh = q_of_h(h, params)
    return params.velocity.derivative(qh) * np.exp(u + 2.0 * h)


def check_tvd(inv_old, inv_new, dx, dt, C=1.0):
    """Compare TV(u) + TV(h) across one step against the slack C dx dt."""
    tv_old = inv_old.total_variation
    tv_new = inv_new.total_variation
    increase = max(0.0, tv_new - tv_old)
    slack = C * dx * dt
    return TVDReport(tv_old, tv_new, increase, slack, max(0.0, tv_new - tv_old - slack))


def solve_relaxation(rho0, grid, params, T, cfl=CFL_MAX, dt=None, check=True, track_tvd=True,
                     tvd_constant=1.0, q0=None):
    """March the relaxation system to time T, storing every level."""
    if params.kernel.kind != "exponential":
        raise KernelKindError("the relaxation form exists only for exponential kernels")
    rho0 = np.asarray(rho0, dtype=float)
    if check:
        report = admissibility(params, rho0, grid)
        if not report.ok:
            raise AdmissibilityError("; ".join(report.problems))
    if dt is None:
        dt = stable_dt(grid.dx, params, cfl)
    n_steps = max(1, int(np.ceil(T / dt - 1e-9)))
    dt = T / n_steps
    if q0 is None:
        q0 = look_ahead_average(rho0, grid, params.kernel)
    state = RelaxState(rho0.copy(), np.asarray(q0, dtype=float).copy())
    rho = np.empty((n_steps + 1, grid.n_cells))
    q = np.empty_like(rho)
    rho[0], q[0] = state.rho, state.q
    tvd_rows = []
    can_track = track_tvd and np.all(rho0 > 0)
    inv = riemann_invariants(state, params) if can_track else None
    for k in range(1, n_steps + 1):
        state = step_relaxation(state, dt, grid, params)
        rho[k], q[k] = state.rho, state.q
        if can_track and np.all(state.rho > 0):
            inv_new = riemann_invariants(state, params)
            rep = check_tvd(inv, inv_new, grid.dx, dt, tvd_constant)
            tvd_rows.append({"t": k * dt, "TV_u": float(np.abs(np.diff(inv_new.u)).sum()),
                             "TV_h": float(np.abs(np.diff(inv_new.h)).sum()),
                             "increase": rep.increase, "violation": rep.violation})
            inv = inv_new
    telemetry = {"solver": "relaxation", "dt": dt, "cfl": relaxation_cfl(dt, grid.dx, params),
                 "tvd": tvd_rows}
    return SpaceTimeSolution(grid, dt * np.arange(n_steps + 1), rho, q, "relaxation", telemetry)
