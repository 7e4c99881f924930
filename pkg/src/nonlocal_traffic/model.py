"""Velocity laws, look-ahead kernels, and the scalar admissibility checks.

Everything here is immutable after construction. Derivative bounds of the
velocity law are measured on a dense sample grid unless supplied explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidModelError, OutOfRangeError

N_SAMPLES = 10_000
G_INVERSE_TOL = 1e-12


def _sample_grid(n=N_SAMPLES):
    return np.linspace(0.0, 1.0, n + 1)


@dataclass(frozen=True)
class VelocityModel:
    """Decreasing speed-density law v on [0, 1] with v(1) = 0."""

    name: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    second_derivative: Callable[[np.ndarray], np.ndarray]
    v_max: float = field(default=np.nan)
    sup_dv: float = field(default=np.nan)
    sup_ddv: float = field(default=np.nan)
    min_abs_dv: float = field(default=np.nan)
    params: tuple = ()

    def __post_init__(self):
        r = _sample_grid()
        bounds = {
            "v_max": float(self.evaluate(np.float64(0.0))),
            "sup_dv": float(np.max(np.abs(self.derivative(r)))),
            "sup_ddv": float(np.max(np.abs(self.second_derivative(r)))),
            "min_abs_dv": float(np.min(np.abs(self.derivative(r)))),
        }
        for key, value in bounds.items():
            if np.isnan(getattr(self, key)):
                object.__setattr__(self, key, value)

    def __call__(self, rho):
        return self.evaluate(rho)

    def check(self, n=N_SAMPLES):
        """Return a list of velocity-law violations (empty when valid)."""
        problems = []
        r = _sample_grid(n)
        vals = self.evaluate(r)
        if not np.all(np.diff(vals) < 0):
            problems.append("velocity is not strictly decreasing on the sample grid")
        if abs(vals[0] - self.v_max) > 1e-12 or self.v_max <= 0:
            problems.append(f"v(0)={vals[0]!r} does not match positive v_max={self.v_max!r}")
        if abs(vals[-1]) > 1e-12:
            problems.append(f"v(1)={vals[-1]!r} is not zero")
        dv = np.abs(self.derivative(r))
        if dv.max() > self.sup_dv * (1 + 1e-12) + 1e-14 or dv.min() < self.min_abs_dv * (1 - 1e-12) - 1e-14:
            problems.append("supplied derivative bounds do not bound the sampled |v'|")
        if np.abs(self.second_derivative(r)).max() > self.sup_ddv * (1 + 1e-12) + 1e-14:
            problems.append("supplied bound on |v''| is too small")
        return problems

    def inverse(self, speed):
        """Density with v(density) = speed, for speed in [0, v_max]."""
        speed = np.asarray(speed, dtype=float)
        if np.any(speed < -1e-12) or np.any(speed > self.v_max + 1e-12):
            raise OutOfRangeError("speed outside [0, v_max] cannot be inverted")
        lo = np.zeros_like(speed)
        hi = np.ones_like(speed)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            above = self.evaluate(mid) > speed
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        return 0.5 * (lo + hi)


def greenshields(v_max=1.0):
    return VelocityModel(
        name="greenshields",
        evaluate=lambda r: v_max * (1.0 - np.asarray(r, dtype=float)),
        derivative=lambda r: np.full_like(np.asarray(r, dtype=float), -v_max),
        second_derivative=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        params=(("v_max", v_max),),
    )


def quadratic(v_max=1.0):
    """v(rho) = v_max (1 - rho^2); min |v'| = 0 at rho = 0."""
    return VelocityModel(
        name="quadratic",
        evaluate=lambda r: v_max * (1.0 - np.asarray(r, dtype=float) ** 2),
        derivative=lambda r: -2.0 * v_max * np.asarray(r, dtype=float),
        second_derivative=lambda r: np.full_like(np.asarray(r, dtype=float), -2.0 * v_max),
        params=(("v_max", v_max),),
    )


VELOCITY_PRESETS = {"greenshields": greenshields, "quadratic": quadratic}


@dataclass(frozen=True)
class KernelSpec:
    """Non-negative look-ahead weight w(s) on [0, inf) with w' <= -beta w.

    ``kind="exponential"`` is w(s) = exp(-s/epsilon)/epsilon. ``kind="tabulated"``
    interpolates (s_table, w_table) linearly and carries a user-supplied decay
    rate ``beta`` and value ``w0``.
    """

    kind: str = "exponential"
    epsilon: float = 1.0
    beta: float = np.nan
    w0: float = np.nan
    truncation_tol: float = 1e-10
    s_table: Optional[tuple] = None
    w_table: Optional[tuple] = None

    def __post_init__(self):
        if self.kind == "exponential":
            if not self.epsilon > 0:
                raise InvalidModelError(f"kernel length scale must be positive, got {self.epsilon}")
            object.__setattr__(self, "beta", 1.0 / self.epsilon)
            object.__setattr__(self, "w0", 1.0 / self.epsilon)
        elif self.kind == "tabulated":
            if self.s_table is None or self.w_table is None:
                raise InvalidModelError("tabulated kernel needs s_table and w_table")
            object.__setattr__(self, "s_table", tuple(float(s) for s in self.s_table))
            object.__setattr__(self, "w_table", tuple(float(w) for w in self.w_table))
            if np.isnan(self.w0):
                object.__setattr__(self, "w0", self.w_table[0])
        else:
            raise InvalidModelError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def exponential(cls, epsilon, truncation_tol=1e-10):
        return cls(kind="exponential", epsilon=float(epsilon), truncation_tol=truncation_tol)

    def evaluate(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "exponential":
            return np.where(s >= 0, np.exp(-np.maximum(s, 0.0) / self.epsilon) / self.epsilon, 0.0)
        return np.interp(s, self.s_table, self.w_table, left=0.0, right=0.0)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "exponential":
            return -self.evaluate(s) / self.epsilon
        st = np.asarray(self.s_table)
        slopes = np.gradient(np.asarray(self.w_table), st)
        return np.interp(s, st, slopes, left=0.0, right=0.0)

    def __call__(self, s):
        return self.evaluate(s)

    def tail_mass(self, s):
        """Mass of the kernel beyond s."""
        if self.kind == "exponential":
            return float(np.exp(-s / self.epsilon))
        st = np.asarray(self.s_table)
        wt = np.asarray(self.w_table)
        total = np.trapezoid(wt, st)
        keep = st <= s
        head = np.trapezoid(np.append(wt[keep], np.interp(s, st, wt)), np.append(st[keep], s))
        return float(max(total - head, 0.0))

    def support_cutoff(self):
        """Smallest s_max whose tail mass is at most ``truncation_tol``."""
        if self.kind == "exponential":
            return self.epsilon * np.log(1.0 / self.truncation_tol)
        st = np.asarray(self.s_table)
        for s in st:
            if self.tail_mass(s) <= self.truncation_tol:
                return float(s)
        return float(st[-1])

    def check(self, n=N_SAMPLES, tol=1e-8):
        """Return a list of kernel violations (empty when valid)."""
        problems = []
        if not self.beta > 0:
            problems.append(f"decay rate beta={self.beta} must be positive")
        if not self.w0 > 0:
            problems.append(f"w(0)={self.w0} must be positive")
        s_end = self.support_cutoff()
        s = np.linspace(0.0, s_end, n + 1)
        w = self.evaluate(s)
        if np.any(w < 0):
            problems.append("kernel takes negative values")
        mass = 1.0 - self.tail_mass(s_end) if self.kind == "exponential" else np.trapezoid(w, s)
        if abs(mass + self.tail_mass(s_end) - 1.0) > 1e-6:
            problems.append(f"kernel integrates to {mass + self.tail_mass(s_end):.8f}, not 1")
        if self.kind == "tabulated":
            slopes = np.diff(w) / np.diff(s)
            mid = 0.5 * (w[1:] + w[:-1])
            excess = slopes + self.beta * mid
            if np.max(excess) > tol * max(1.0, self.w0 * self.beta):
                problems.append("sampled w' exceeds -beta w (decay condition)")
        elif np.max(self.derivative(s) + self.beta * w) > tol:
            problems.append("sampled w' exceeds -beta w (decay condition)")
        return problems

    def describe(self):
        if self.kind == "exponential":
            return {"kind": self.kind, "epsilon": self.epsilon, "truncation_tol": self.truncation_tol}
        return {"kind": self.kind, "beta": self.beta, "w0": self.w0, "truncation_tol": self.truncation_tol,
                "s_table": list(self.s_table), "w_table": list(self.w_table)}


@dataclass(frozen=True)
class ModelParams:
    gamma: float
    kernel: KernelSpec
    velocity: VelocityModel

    def __post_init__(self):
        if self.gamma < 0:
            raise InvalidModelError(f"delay parameter gamma must be non-negative, got {self.gamma}")

    def with_(self, **changes):
        values = {"gamma": self.gamma, "kernel": self.kernel, "velocity": self.velocity}
        values.update(changes)
        return ModelParams(**values)


@dataclass(frozen=True)
class AdmissibilityReport:
    gamma_max: float
    velocity_ok: bool
    kernel_ok: bool
    gamma_ok: bool
    bv_condition_ok: bool
    rho_min: float = np.nan
    rho_max: float = np.nan
    in_class_X: Optional[bool] = None
    problems: tuple = ()

    @property
    def ok(self):
        return self.velocity_ok and self.kernel_ok and self.gamma_ok and self.in_class_X is not False

    def to_dict(self):
        return {k: (v if not isinstance(v, tuple) else list(v)) for k, v in self.__dict__.items()}


def gamma_max(velocity, kernel):
    """Largest delay parameter admitted by the well-posedness theory.

    min{ 1 / (3 (v_max + |v'|_inf)),  beta / (w(0) |v'|_inf) }
    """
    if not kernel.beta > 0 or not kernel.w0 > 0:
        raise InvalidModelError(f"kernel needs beta > 0 and w(0) > 0 (beta={kernel.beta}, w0={kernel.w0})")
    if not velocity.sup_dv > 0:
        raise InvalidModelError("velocity is not strictly decreasing: sup |v'| = 0")
    return min(1.0 / (3.0 * (velocity.v_max + velocity.sup_dv)),
               kernel.beta / (kernel.w0 * velocity.sup_dv))


def check_bv_condition(params):
    v = params.velocity
    lhs = (1.0 - 2.0 * params.gamma * v.sup_dv) * v.min_abs_dv
    rhs = (1.0 + params.gamma * v.v_max) * v.sup_ddv
    return bool(lhs >= rhs)


def _check_g_monotone(params):
    if params.gamma * params.velocity.sup_dv >= 1.0:
        raise InvalidModelError("g(rho) = rho (1 + gamma v(rho)) is not monotone: gamma |v'|_inf >= 1")


def g(rho, params):
    """Scaled density rho (1 + gamma v(rho))."""
    _check_g_monotone(params)
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < -1e-12) or np.any(rho > 1 + 1e-12):
        raise OutOfRangeError("g is defined on [0, 1]")
    return rho * (1.0 + params.gamma * params.velocity(rho))


def g_inverse(z, params, tol=G_INVERSE_TOL):
    """Inverse of ``g`` on [0, 1]: bracketing bisection, then Newton polish."""
    _check_g_monotone(params)
    z = np.asarray(z, dtype=float)
    if np.any(z < -1e-12) or np.any(z > 1 + 1e-12):
        raise OutOfRangeError("g_inverse is defined on [0, 1]")
    z = np.clip(z, 0.0, 1.0)
    gam, v = params.gamma, params.velocity
    lo = np.zeros_like(z)
    hi = np.ones_like(z)
    while np.max(hi - lo) > 1e-6:
        mid = 0.5 * (lo + hi)
        below = mid * (1.0 + gam * v(mid)) < z
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    r = 0.5 * (lo + hi)
    for _ in range(50):
        resid = r * (1.0 + gam * v(r)) - z
        slope = 1.0 + gam * v(r) + gam * r * v.derivative(r)
        step = resid / slope
        r_new = r - step
        # Newton leaving the bracket falls back to the bracket midpoint
        r_new = np.where((r_new < lo) | (r_new > hi), 0.5 * (lo + hi), r_new)
        lo = np.where(resid < 0, np.maximum(lo, r), lo)
        hi = np.where(resid > 0, np.minimum(hi, r), hi)
        r = r_new
        if np.max(np.abs(step)) < tol:
            break
    return r if r.ndim else float(r)


def initial_z(rho0, grid, params):
    """rho0 (1 + gamma v(q0)) and q0 for data on ``grid``."""
    from .quadrature import look_ahead_average

    q0 = look_ahead_average(rho0, grid, params.kernel)
    return rho0 * (1.0 + params.gamma * params.velocity(q0)), q0


def rho_bounds(rho0, grid, params):
    """Invariant interval (rho_min, rho_max) for the vertically extended data."""
    rho0 = np.asarray(rho0, dtype=float)
    z0, _ = initial_z(rho0, grid, params)
    lo = min(rho0.min(), *grid.extension)
    hi = max(rho0.max(), *grid.extension)
    zlo = min(z0.min(), float(g(min(grid.extension), params)))
    zhi = max(z0.max(), float(g(max(grid.extension), params)))
    rho_min = min(lo, g_inverse(np.clip(zlo, 0, 1), params))
    rho_max = max(hi, g_inverse(np.clip(zhi, 0, 1), params))
    return float(rho_min), float(rho_max)


@dataclass(frozen=True)
class MembershipReport:
    member: bool
    total_variation: float
    violations: tuple = ()
    first_violation_index: Optional[int] = None


def membership_X(rho0, grid, params, tol=1e-10):
    """Check 0 <= rho0 <= 1, 0 <= rho0 (1 + gamma v(q0)) <= 1 and finite TV."""
    rho0 = np.asarray(rho0, dtype=float)
    z0, _ = initial_z(np.clip(rho0, 0.0, 1.0), grid, params)
    z0 = np.where((rho0 >= 0) & (rho0 <= 1), z0, rho0)
    violations = []
    first = None
    bad_rho = np.flatnonzero((rho0 < -tol) | (rho0 > 1 + tol))
    if bad_rho.size:
        first = int(bad_rho[0])
        violations.append(f"density outside [0,1] at cell {first}: {rho0[first]!r}")
    bad_z = np.flatnonzero((z0 < -tol) | (z0 > 1 + tol))
    if bad_z.size:
        idx = int(bad_z[0])
        first = idx if first is None else min(first, idx)
        violations.append(f"rho0 (1 + gamma v(q0)) = {z0[idx]!r} outside [0,1] at cell {idx}")
    tv = float(np.abs(np.diff(rho0)).sum())
    return MembershipReport(member=not violations, total_variation=tv, violations=tuple(violations),
                            first_violation_index=first)


def admissibility(params, rho0=None, grid=None):
    """Collect every model-level check into one report."""
    problems = list(params.velocity.check()) + list(params.kernel.check())
    a1 = not params.velocity.check()
    a2 = not params.kernel.check()
    try:
        gmax = gamma_max(params.velocity, params.kernel)
    except InvalidModelError as exc:
        problems.append(str(exc))
        gmax = float("nan")
    gamma_ok = bool(params.gamma <= gmax)
    if not gamma_ok:
        problems.append(f"gamma={params.gamma} exceeds gamma_max={gmax:.6g} of the smallness condition "
                        "min{1/(3(v_max+|v'|)), beta/(w(0)|v'|)}")
    report = dict(gamma_max=gmax, velocity_ok=a1, kernel_ok=a2, gamma_ok=gamma_ok,
                  bv_condition_ok=check_bv_condition(params))
    if rho0 is not None and grid is not None and gamma_ok and a1:
        member = membership_X(rho0, grid, params)
        problems.extend(member.violations)
        report["in_class_X"] = member.member
        if member.member:
            report["rho_min"], report["rho_max"] = rho_bounds(rho0, grid, params)
    return AdmissibilityReport(problems=tuple(problems), **report)
