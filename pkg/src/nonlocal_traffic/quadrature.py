"""Nonlocal average q along the delayed look-ahead path and its derivative.

The path from (t, x) is s -> (t - gamma s, x + s). Quadrature nodes s_k = k dx
land on cell centres, so only time interpolation is needed along the path.
Weights integrate the kernel exactly against piecewise-linear hat functions on
the node set, which keeps the rule accurate even when dx is larger than the
kernel length scale.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import FutureSampleError, KernelKindError, TruncationError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class QuadratureScheme:
    ds: float
    s_nodes: np.ndarray
    weights: np.ndarray
    dweights: np.ndarray
    w_end: float
    w0: float
    truncation_tol: float

    @property
    def s_max(self):
        return float(self.s_nodes[-1])

    @property
    def n_nodes(self):
        return self.s_nodes.size

    @property
    def mass(self):
        return float(self.weights.sum())


def _hat_weights(fn, ds, n_panels):
    """int fn(s) phi_k(s) ds for hat functions phi_k on s_k = k ds."""
    left = np.arange(n_panels) * ds
    s = left[:, None] + 0.5 * ds * (_GL_NODES[None, :] + 1.0)
    vals = fn(s) * (0.5 * ds * _GL_WEIGHTS[None, :])
    frac = (s - left[:, None]) / ds
    out = np.zeros(n_panels + 1)
    out[:-1] += (vals * (1.0 - frac)).sum(axis=1)
    out[1:] += (vals * frac).sum(axis=1)
    return out


@lru_cache(maxsize=64)
def build_scheme(kernel, ds):
    """Quadrature rule on s-nodes spaced ``ds`` out to the truncation point."""
    s_cut = kernel.support_cutoff()
    n_panels = max(1, int(np.ceil(s_cut / ds - 1e-9)))
    weights = _hat_weights(kernel.evaluate, ds, n_panels)
    dweights = _hat_weights(kernel.derivative, ds, n_panels)
    s_nodes = np.arange(n_panels + 1) * ds
    scheme = QuadratureScheme(ds=ds, s_nodes=s_nodes, weights=weights, dweights=dweights,
                              w_end=float(kernel.evaluate(s_nodes[-1])), w0=float(kernel.w0),
                              truncation_tol=kernel.truncation_tol)
    if scheme.mass < 1.0 - 10.0 * kernel.truncation_tol:
        raise TruncationError(f"captured kernel mass {scheme.mass:.3e} is below 1 - 10 tol")
    return scheme


def look_ahead_average(rho, grid, kernel):
    """Purely spatial average  int rho(x + s) w(s) ds  (the t = 0 value q0)."""
    scheme = build_scheme(kernel, grid.dx)
    padded = grid.extended(np.asarray(rho, dtype=float), scheme.n_nodes - 1)
    win = sliding_window_view(padded, scheme.n_nodes)
    return win @ scheme.weights / scheme.mass


def path_samples(field, t, scheme, gamma):
    """rho(t - gamma s_k, x_i + s_k) as an (n_cells, n_nodes) array.

    Times before the first stored level fall back to the first level, which is
    the vertical extension rho(t, x) = rho0(x) for t <= 0.
    """
    grid = field.grid
    n_levels = field.n_levels
    if t > field.t_last + 1e-12 * max(1.0, abs(field.t_last)):
        raise FutureSampleError(f"q requested at t={t} beyond stored frontier {field.t_last}")
    K = scheme.n_nodes
    tau = np.clip((t - gamma * scheme.s_nodes - field.t0) / field.dt, 0.0, n_levels - 1)
    k0 = np.minimum(np.floor(tau).astype(int), max(n_levels - 2, 0))
    k1 = np.minimum(k0 + 1, n_levels - 1)
    a = tau - k0
    first, last = int(k0.min()), int(k1.max()) + 1
    block = field.values[first:last]
    padded = np.concatenate([block, np.full((last - first, K - 1), grid.extension[1])], axis=1)
    win = sliding_window_view(padded, K, axis=1)
    cols = np.arange(K)
    lo = win[k0 - first, :, cols]
    hi = win[k1 - first, :, cols]
    return ((1.0 - a)[:, None] * lo + a[:, None] * hi).T


def compute_q(field, t, params):
    """Nonlocal average q at time t for every cell of ``field.grid``."""
    scheme = build_scheme(params.kernel, field.grid.dx)
    return path_samples(field, t, scheme, params.gamma) @ scheme.weights / scheme.mass


def compute_dy_q(field, t, params):
    """Directional derivative (d/dx - gamma d/dt) q in integrated-by-parts form.

    dy q = -w(0) rho(t, x) - int rho w'(s) ds, with the boundary term at the
    truncation point kept so that constant states give exactly zero.
    """
    scheme = build_scheme(params.kernel, field.grid.dx)
    path = path_samples(field, t, scheme, params.gamma)
    return -scheme.w0 * path[:, 0] - path @ scheme.dweights + scheme.w_end * path[:, -1]


def q_and_dy_q(field, t, params):
    scheme = build_scheme(params.kernel, field.grid.dx)
    path = path_samples(field, t, scheme, params.gamma)
    q = path @ scheme.weights / scheme.mass
    dyq = -scheme.w0 * path[:, 0] - path @ scheme.dweights + scheme.w_end * path[:, -1]
    return q, dyq


def relax_toward(q_upstream, rho_bar, dt, gamma, epsilon):
    """Exact update of  dq/dt = (rho_bar - q) / (gamma epsilon)  over dt."""
    return rho_bar + (q_upstream - rho_bar) * np.exp(-dt / (gamma * epsilon))


def advance_q_exponential(q_prev, field, t, dt, params):
    """q at t + dt from q at t, integrating along x + t/gamma = const.

    ``field`` must hold rho up to t + dt.
    """
    kernel = params.kernel
    if kernel.kind != "exponential":
        raise KernelKindError("the recursive update needs an exponential kernel")
    grid = field.grid
    x = grid.centers
    shift = dt / params.gamma
    upstream = np.interp(x + shift, x, q_prev, right=grid.extension[1])
    rho_bar = field.sample_many(np.full_like(x, t + 0.5 * dt), x + 0.5 * shift)
    return relax_toward(upstream, rho_bar, dt, params.gamma, kernel.epsilon)


def compute_q_exponential(field, t, params):
    """March q from the first stored level to t with the recursive update."""
    if params.kernel.kind != "exponential":
        raise KernelKindError("the recursive update needs an exponential kernel")
    q = look_ahead_average(field.values[0], field.grid, params.kernel)
    n_steps = field.level_index(t)
    for k in range(n_steps):
        q = advance_q_exponential(q, field, field.t0 + k * field.dt, field.dt, params)
    return q
