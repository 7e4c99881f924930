"""Picard iteration of the characteristics map on short time windows.

For a density iterate on the window we compute q and its directional
derivative along the delayed look-ahead path, carry z = rho (1 + gamma v(q))
along dx/dt = v(q) with the multiplicative source

    dz/dt = -z v'(q) dy_q / (1 + gamma v(q)),

and read back rho = z / (1 + gamma v(q)). Windows are chained so that the
converged history serves as past-time data for the next window.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, NoContractionError, StepTooLargeError
from .grid import SamplePoint, SpaceTimeField, SpaceTimeSolution
from .model import admissibility
from .quadrature import look_ahead_average, q_and_dy_q

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PicardConfig:
    window: float | None = None  # default min(gamma/2, 0.1/v_max)
    max_iters: int = 50
    tol: float = 1e-9
    ode_steps: int = 1
    cfl: float = 0.5

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("Picard tolerance must be positive")
        if self.ode_steps < 1:
            raise ValueError("need at least one ODE substep per level")


@dataclass
class ZState:
    z: np.ndarray
    q: np.ndarray
    rho: np.ndarray


def speed_along(q, params):
    """V(q) = v(q) / (1 + gamma v(q)), the speed in the (tau, xi) frame."""
    vq = params.velocity(q)
    return vq / (1.0 + params.gamma * vq)


def trace_characteristic(q_field, start, dtau, params, n_steps=None):
    """Integrate d(xi)/d(tau) = V(q(tau - gamma xi, xi)) by the midpoint rule.

    The point (t, x) corresponds to tau = t + gamma x. With ``dtau < 0`` the
    curve is followed backwards until it reaches t = 0 (the last point is
    placed on t = 0 by linear interpolation); a final step that overshoots
    t = 0 by more than one stored time level is rejected.
    """
    gam = params.gamma
    tau, xi = start.t + gam * start.x, start.x
    path = [SamplePoint(start.t, start.x)]

    def V(tau_, xi_):
        t_ = max(tau_ - gam * xi_, q_field.t0)
        return float(speed_along(q_field.sample_many(np.array([t_]), np.array([xi_]))[0], params))

    steps = 0
    while n_steps is None or steps < n_steps:
        k1 = V(tau, xi)
        k2 = V(tau + 0.5 * dtau, xi + 0.5 * dtau * k1)
        tau_new, xi_new = tau + dtau, xi + dtau * k2
        t_new = tau_new - gam * xi_new
        steps += 1
        if dtau < 0 and t_new <= 0.0:
            t_old = tau - gam * xi
            if -t_new > q_field.dt:
                raise StepTooLargeError(f"backward trace overshoots t=0 by {-t_new:.3g} > dt={q_field.dt:.3g}")
            frac = t_old / (t_old - t_new) if t_old != t_new else 1.0
            xi_end = xi + frac * (xi_new - xi)
            path.append(SamplePoint(0.0, xi_end))
            break
        tau, xi = tau_new, xi_new
        path.append(SamplePoint(t_new, xi))
        if n_steps is None and dtau > 0:
            raise ValueError("forward traces need an explicit n_steps")
    return path


def source_rate(q, dyq, params):
    """Growth rate a of z in physical time along dx/dt = v(q)."""
    vq = params.velocity(q)
    return -params.velocity.derivative(q) * dyq / (1.0 + params.gamma * vq)


def heun_factor(a_start, a_end, h):
    """RK2 (Heun) amplification for dz/dt = a(t) z over one step."""
    return 1.0 + 0.5 * h * (a_start + a_end) + 0.5 * h * h * a_start * a_end


def transport_z(z_start, q_levels, dyq_levels, grid, dt, params, ode_steps=1):
    """Semi-Lagrangian transport of z across consecutive levels.

    ``q_levels``/``dyq_levels`` hold the level where ``z_start`` lives followed
    by each new level. Returns z on the new levels.
    """
    x = grid.centers
    z_left = grid.extension[0] * (1.0 + params.gamma * params.velocity(grid.extension[0]))
    out = []
    z_prev = z_start
    h = dt / ode_steps
    for k in range(1, len(q_levels)):
        q0, q1 = q_levels[k - 1], q_levels[k]
        a0 = source_rate(q0, dyq_levels[k - 1], params)
        a1 = source_rate(q1, dyq_levels[k], params)
        # sub-steps march backward from the arrival node along the same curve
        pos = x.copy()
        factor = np.ones_like(x)
        for j in range(ode_steps, 0, -1):
            s_hi, s_lo = j / ode_steps, (j - 1) / ode_steps
            q_hi = (1 - s_hi) * np.interp(pos, x, q0) + s_hi * np.interp(pos, x, q1)
            mid = pos - 0.5 * h * params.velocity(q_hi)
            s_mid = 0.5 * (s_hi + s_lo)
            q_mid = (1 - s_mid) * np.interp(mid, x, q0) + s_mid * np.interp(mid, x, q1)
            foot = pos - h * params.velocity(q_mid)
            a_hi = (1 - s_hi) * np.interp(pos, x, a0) + s_hi * np.interp(pos, x, a1)
            a_lo = (1 - s_lo) * np.interp(foot, x, a0) + s_lo * np.interp(foot, x, a1)
            factor *= heun_factor(a_lo, a_hi, h)
            pos = foot
        z_new = np.interp(pos, x, z_prev, left=z_left) * factor
        out.append(z_new)
        z_prev = z_new
    return out


def default_window(params):
    return min(params.gamma / 2.0, 0.1 / params.velocity.v_max)


def solve_characteristics(rho0, grid, params, T, cfg=PicardConfig(), dt=None, check=True):
    """Lipschitz solution on [0, T] by windowed Picard iteration.

    Returns a SpaceTimeSolution whose telemetry records, per window, the
    effective window length, the iteration count and the residual history.
    """
    rho0 = np.asarray(rho0, dtype=float)
    if check:
        report = admissibility(params, rho0, grid)
        if not report.ok:
            raise AdmissibilityError("; ".join(report.problems))
    v = params.velocity
    if dt is None:
        dt = cfg.cfl * grid.dx / v.v_max
    n_steps = max(1, int(np.ceil(T / dt - 1e-9)))
    dt = T / n_steps
    n = grid.n_cells
    rho = np.empty((n_steps + 1, n))
    q = np.empty_like(rho)
    dyq = np.empty_like(rho)
    z = np.empty_like(rho)
    rho[0] = rho0
    field0 = SpaceTimeField(grid, 0.0, dt, rho[:1])
    q[0], dyq[0] = q_and_dy_q(field0, 0.0, params)
    z[0] = rho0 * (1.0 + params.gamma * v(q[0]))

    window = cfg.window if cfg.window is not None else default_window(params)
    m_default = max(1, int(round(window / dt)))
    windows = []
    k_a = 0
    while k_a < n_steps:
        m = min(m_default, n_steps - k_a)
        while True:
            ok, record = _picard_window(rho, q, dyq, z, k_a, k_a + m, grid, dt, params, cfg)
            if ok:
                break
            if m == 1:
                raise NoContractionError(
                    f"Picard residual did not converge on a single step at t={k_a * dt:.4g}: "
                    f"history {record['residuals'][:5]}...")
            m = max(1, m // 2)
            log.debug("bisecting Picard window to %d levels at t=%.4g", m, k_a * dt)
        record["t_start"] = k_a * dt
        record["window"] = m * dt
        windows.append(record)
        k_a += m

    times = dt * np.arange(n_steps + 1)
    telemetry = {
        "solver": "characteristics",
        "dt": dt,
        "windows": windows,
        "max_iterations": max(w["iterations"] for w in windows),
        "max_z_consistency": float(np.max(np.abs(z - rho * (1.0 + params.gamma * v(q))))),
    }
    sol = SpaceTimeSolution(grid, times, rho, q, "characteristics", telemetry)
    sol.z = z
    sol.dyq = dyq
    return sol


def _picard_window(rho, q, dyq, z, k_a, k_b, grid, dt, params, cfg):
    v = params.velocity
    rho[k_a + 1:k_b + 1] = rho[k_a]
    residuals = []
    for it in range(1, cfg.max_iters + 1):
        field = SpaceTimeField(grid, 0.0, dt, rho[:k_b + 1])
        for k in range(k_a + 1, k_b + 1):
            q[k], dyq[k] = q_and_dy_q(field, k * dt, params)
        z_new = transport_z(z[k_a], q[k_a:k_b + 1], dyq[k_a:k_b + 1], grid, dt, params, cfg.ode_steps)
        z[k_a + 1:k_b + 1] = z_new
        rho_new = z[k_a + 1:k_b + 1] / (1.0 + params.gamma * v(q[k_a + 1:k_b + 1]))
        resid = float(np.max(np.abs(rho_new - rho[k_a + 1:k_b + 1])))
        residuals.append(resid)
        rho[k_a + 1:k_b + 1] = rho_new
        if not np.isfinite(resid) or np.min(rho_new) < -0.05 or np.max(rho_new) > 1.05:
            return False, {"iterations": it, "residuals": residuals}
        if resid <= cfg.tol:
            return True, {"iterations": it, "residuals": residuals}
    return False, {"iterations": cfg.max_iters, "residuals": residuals}


def z_state(sol, params):
    return ZState(z=sol.z, q=sol.q, rho=sol.rho)
