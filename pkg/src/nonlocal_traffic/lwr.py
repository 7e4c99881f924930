"""Godunov scheme for the local LWR model rho_t + (rho v(rho))_x = 0."""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .errors import CFLError
from .grid import SpaceTimeSolution

CFL_MAX = 0.9


def flux(rho, velocity):
    return rho * velocity(rho)


def flux_derivative(rho, velocity):
    return velocity(rho) + rho * velocity.derivative(rho)


@lru_cache(maxsize=32)
def critical_points(velocity, n=4096):
    """Interior zeros of f'(rho) on [0, 1], bracketed on a dense grid."""
    r = np.linspace(0.0, 1.0, n + 1)
    d = flux_derivative(r, velocity)
    roots = []
    for i in np.flatnonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0):
        roots.append(brentq(lambda s: float(flux_derivative(s, velocity)), r[i], r[i + 1], xtol=1e-14))
    roots.extend(float(r[i]) for i in np.flatnonzero(d[1:-1] == 0) + 1)
    return tuple(sorted(roots))


def max_wave_speed(velocity, n=10_000):
    return float(np.max(np.abs(flux_derivative(np.linspace(0.0, 1.0, n + 1), velocity))))


def godunov_flux(rho_l, rho_r, velocity):
    """min of f over [rho_l, rho_r] if rho_l <= rho_r, else max over [rho_r, rho_l]."""
    rho_l = np.asarray(rho_l, dtype=float)
    rho_r = np.asarray(rho_r, dtype=float)
    lo = np.minimum(rho_l, rho_r)
    hi = np.maximum(rho_l, rho_r)
    f_lo, f_hi = flux(lo, velocity), flux(hi, velocity)
    fmin = np.minimum(f_lo, f_hi)
    fmax = np.maximum(f_lo, f_hi)
    for c in critical_points(velocity):
        inside = (lo <= c) & (c <= hi)
        fc = float(flux(c, velocity))
        fmin = np.where(inside, np.minimum(fmin, fc), fmin)
        fmax = np.where(inside, np.maximum(fmax, fc), fmax)
    return np.where(rho_l <= rho_r, fmin, fmax)


def step_lwr(rho, dt, grid, velocity):
    left, right = grid.extension
    ext = np.concatenate([[left], rho, [right]])
    F = godunov_flux(ext[:-1], ext[1:], velocity)
    return rho - dt / grid.dx * (F[1:] - F[:-1])


def solve_lwr(rho0, T, grid, velocity, cfl=CFL_MAX, dt=None, store_every=1):
    """Forward-Euler Godunov solution on [0, T]."""
    speed = max_wave_speed(velocity)
    if dt is None:
        dt = cfl * grid.dx / speed
    if dt * speed / grid.dx > CFL_MAX + 1e-12:
        raise CFLError(f"CFL number {dt * speed / grid.dx:.4f} exceeds {CFL_MAX}")
    n_steps = max(1, int(np.ceil(T / dt - 1e-9)))
    dt = T / n_steps
    r = np.asarray(rho0, dtype=float).copy()
    levels, stored = [r.copy()], [0]
    for k in range(1, n_steps + 1):
        r = step_lwr(r, dt, grid, velocity)
        if k % store_every == 0 or k == n_steps:
            levels.append(r.copy())
            stored.append(k)
    rho = np.array(levels)
    times = dt * np.array(stored)
    return SpaceTimeSolution(grid, times, rho, rho.copy(), "lwr", {"solver": "lwr", "dt": dt})


def rarefaction_exact(x, t, rho_l, rho_r, velocity):
    """Self-similar solution for a rarefaction Riemann problem (f' decreasing)."""
    xi = np.asarray(x, dtype=float) / t
    s_l = flux_derivative(rho_l, velocity)
    s_r = flux_derivative(rho_r, velocity)
    out = np.where(xi <= s_l, rho_l, rho_r).astype(float)
    fan = (xi > s_l) & (xi < s_r)
    if np.any(fan):
        lo, hi = min(rho_l, rho_r), max(rho_l, rho_r)
        target = xi[fan]
        a = np.full(target.shape, lo)
        b = np.full(target.shape, hi)
        decreasing = flux_derivative(lo, velocity) > flux_derivative(hi, velocity)
        for _ in range(60):
            m = 0.5 * (a + b)
            go_right = (flux_derivative(m, velocity) > target) == decreasing
            a = np.where(go_right, m, a)
            b = np.where(go_right, b, m)
        out[fan] = 0.5 * (a + b)
    return out
