import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nonlocal_traffic.diagnostics import EntropyPair
from nonlocal_traffic.grid import Grid1D, SpaceTimeField, tv_space
from nonlocal_traffic.lwr import flux, godunov_flux
from nonlocal_traffic.model import KernelSpec, ModelParams, g, g_inverse, greenshields
from nonlocal_traffic.quadrature import compute_q
from nonlocal_traffic.relaxation import RelaxState, dLambda_du, riemann_invariants, solve_relaxation

unit = st.floats(0.0, 1.0, allow_nan=False)
interior = st.floats(0.02, 0.98, allow_nan=False)
gammas = st.floats(0.0, 0.16)
eps = st.floats(0.02, 0.5)


def params(gamma=0.1, epsilon=0.1):
    return ModelParams(gamma, KernelSpec.exponential(epsilon), greenshields())


@given(unit, gammas)
def test_g_inverse_roundtrip(r, gamma):
    p = params(gamma)
    assert abs(g_inverse(g(r, p), p) - r) <= 1e-10


@given(arrays(float, 6, elements=interior), gammas, eps)
@settings(max_examples=30, deadline=None)
def test_q_is_a_convex_combination(levels, gamma, epsilon):
    grid = Grid1D.from_interval(0, 1, 6, (levels[0], levels[-1]))
    vals = np.tile(levels, (3, 1))
    q = compute_q(SpaceTimeField(grid, 0.0, 0.05, vals), 0.1, params(gamma, epsilon))
    lo, hi = levels.min(), levels.max()
    assert np.all(q >= lo - 1e-12) and np.all(q <= hi + 1e-12)


@given(arrays(float, 8, elements=interior), st.floats(0.0, 0.2), gammas)
@settings(max_examples=30, deadline=None)
def test_q_is_monotone_in_rho(levels, bump, gamma):
    grid = Grid1D.from_interval(0, 1, 8, (0.5, 0.5))
    p = params(gamma)
    a = np.tile(levels * 0.8, (3, 1))
    b = a + bump
    qa = compute_q(SpaceTimeField(grid, 0.0, 0.05, a), 0.1, p)
    qb = compute_q(SpaceTimeField(grid, 0.0, 0.05, b), 0.1, p)
    assert np.all(qb >= qa - 1e-12)


@given(arrays(float, st.integers(2, 40), elements=unit), st.integers(-10, 10))
def test_tv_shift_and_reflection(v, k):
    assert abs(tv_space(v[::-1]) - tv_space(v)) <= 1e-12
    shifted = np.concatenate([np.full(12 + k, v[0]), v, np.full(12 - k, v[-1])])
    assert abs(tv_space(shifted) - tv_space(v)) <= 1e-12


@given(unit, unit)
def test_godunov_against_dense_oracle(rl, rr):
    v = greenshields()
    r = np.linspace(min(rl, rr), max(rl, rr), 4001)
    r = np.append(r, 0.5) if min(rl, rr) <= 0.5 <= max(rl, rr) else r
    f = flux(r, v)
    expected = f.min() if rl <= rr else f.max()
    assert abs(godunov_flux(rl, rr, v) - expected) <= 1e-7


@given(interior, gammas.filter(lambda x: x > 0.01), eps)
@settings(max_examples=15, deadline=None)
def test_constant_state_is_stationary(c, gamma, epsilon):
    grid = Grid1D.from_interval(-1, 1, 20, (c, c))
    sol = solve_relaxation(np.full(20, c), grid, params(gamma, epsilon), 0.2)
    assert np.max(np.abs(sol.rho - c)) <= 1e-13


@given(interior, unit, gammas.filter(lambda x: x > 0.01))
def test_source_monotone_in_u(rho, q, gamma):
    p = params(gamma)
    inv = riemann_invariants(RelaxState(np.array([rho]), np.array([q])), p)
    assert dLambda_du(inv.u, inv.h, p)[0] <= 0


@given(unit, unit, st.floats(0, 1), gammas)
def test_entropy_is_convex(a, b, lam, gamma):
    pair = EntropyPair(params(gamma))
    mid = lam * a + (1 - lam) * b
    assert pair.eta(mid) <= lam * pair.eta(a) + (1 - lam) * pair.eta(b) + 1e-12
