"""Uniform cell grids, space-time density fields, interpolation and TV."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import FutureSampleError

TIME_UNIFORMITY_TOL = 1e-12
SANITY_BAND = (-0.05, 1.05)


@dataclass(frozen=True)
class Grid1D:
    """Cell-centred grid on [x_left, x_left + n_cells dx].

    Outside the domain the density is held at the plateau values
    ``extension = (left, right)``.
    """

    x_left: float
    dx: float
    n_cells: int
    extension: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        if self.n_cells < 2:
            raise ValueError("need at least two cells")
        left, right = self.extension
        if not (0.0 <= left <= 1.0 and 0.0 <= right <= 1.0):
            raise ValueError(f"extension values must lie in [0, 1], got {self.extension}")
        object.__setattr__(self, "extension", (float(left), float(right)))

    @classmethod
    def from_interval(cls, x_left, x_right, n_cells, extension=(0.0, 0.0)):
        return cls(float(x_left), (x_right - x_left) / n_cells, int(n_cells), tuple(extension))

    @property
    def x_right(self):
        return self.x_left + self.n_cells * self.dx

    @property
    def centers(self):
        return self.x_left + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def length(self):
        return self.n_cells * self.dx

    def with_extension(self, left, right):
        return Grid1D(self.x_left, self.dx, self.n_cells, (left, right))

    def extended(self, values, pad_right, pad_left=0):
        """``values`` with plateau ghost cells appended on each side."""
        left, right = self.extension
        return np.concatenate([np.full(pad_left, left), values, np.full(pad_right, right)])

    def describe(self):
        return {"x_left": self.x_left, "x_right": self.x_right, "dx": self.dx, "n_cells": self.n_cells,
                "extension": list(self.extension)}


class SamplePoint(NamedTuple):
    t: float
    x: float


@dataclass
class SpaceTimeField:
    """Density per (time level, cell) on uniform time levels t0 + k dt.

    Levels are appended by one producer; a published level is never modified.
    Samples before the first level return the first level (vertical extension
    of the initial data into the past).
    """

    grid: Grid1D
    t0: float
    dt: float
    values: np.ndarray
    history_depth: int | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[1] != self.grid.n_cells:
            raise ValueError("values must have one column per cell")
        lo, hi = SANITY_BAND
        if self.values.size and (self.values.min() < lo or self.values.max() > hi):
            raise ValueError(f"density left the sanity band {SANITY_BAND}")

    @classmethod
    def from_levels(cls, grid, times, values, history_depth=None):
        times = np.asarray(times, dtype=float)
        if times.size > 1:
            steps = np.diff(times)
            if np.max(np.abs(steps - steps[0])) > TIME_UNIFORMITY_TOL * max(1.0, abs(times[-1])):
                raise ValueError("time levels must be uniform")
            dt = float(steps[0])
        else:
            dt = 1.0
        return cls(grid, float(times[0]), dt, values, history_depth)

    @property
    def n_levels(self):
        return self.values.shape[0]

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_levels)

    @property
    def t_last(self):
        return self.t0 + self.dt * (self.n_levels - 1)

    def append(self, level_values):
        self.values = np.vstack([self.values, np.asarray(level_values, dtype=float)[None, :]])

    def level_index(self, t):
        return int(round((t - self.t0) / self.dt))

    def sample_many(self, t, x):
        """Vectorised bilinear sample at arrays of times and positions."""
        t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
        if np.any(t > self.t_last + 1e-12 * max(1.0, abs(self.t_last))):
            raise FutureSampleError(f"sample requested beyond stored frontier t={self.t_last}")
        tau = np.clip((t - self.t0) / self.dt, 0.0, self.n_levels - 1)
        k0 = np.minimum(np.floor(tau).astype(int), max(self.n_levels - 2, 0))
        k1 = np.minimum(k0 + 1, self.n_levels - 1)
        a = tau - k0
        xi = (x - self.grid.x_left) / self.grid.dx - 0.5
        i0 = np.floor(xi).astype(int)
        b = xi - i0
        out = (1.0 - a) * ((1.0 - b) * self._gather(k0, i0) + b * self._gather(k0, i0 + 1))
        out += a * ((1.0 - b) * self._gather(k1, i0) + b * self._gather(k1, i0 + 1))
        return out

    def _gather(self, k, i):
        n = self.grid.n_cells
        left, right = self.grid.extension
        val = self.values[k, np.clip(i, 0, n - 1)]
        # beyond the outer cell centres the boundary value blends into the plateau
        return np.where(i < 0, left, np.where(i > n - 1, right, val))


def sample(field, p):
    """Bilinear value of ``field`` at SamplePoint ``p``."""
    return float(field.sample_many(np.array([p.t]), np.array([p.x]))[0])


def tv_space(field, level=-1):
    values = field.values[level] if isinstance(field, SpaceTimeField) else np.asarray(field)
    return float(np.abs(np.diff(values)).sum())


def tv_spacetime(field, t_end=None):
    """Discrete surrogate of the space-time total variation on [t0, t_end]."""
    if field.n_levels < 2:
        raise ValueError("space-time TV needs at least two levels")
    last = field.n_levels if t_end is None else field.level_index(t_end) + 1
    v = field.values[:last]
    dx, dt = field.grid.dx, field.dt
    spatial = np.abs(np.diff(v[1:], axis=1)).sum() * dt
    temporal = np.abs(np.diff(v, axis=0)).sum() * dx
    return float(spatial + temporal)


@dataclass
class SpaceTimeSolution:
    """Density rho and nonlocal average q on every stored time level."""

    grid: Grid1D
    times: np.ndarray
    rho: np.ndarray
    q: np.ndarray
    solver: str
    telemetry: dict = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.telemetry is None:
            self.telemetry = {}

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    @property
    def T(self):
        return float(self.times[-1])

    def rho_field(self):
        return SpaceTimeField(self.grid, float(self.times[0]), self.dt, self.rho)

    def q_field(self):
        return SpaceTimeField(self.grid, float(self.times[0]), self.dt, self.q)

    def level_at(self, t):
        k = int(round((t - self.times[0]) / self.dt)) if self.dt else 0
        return min(max(k, 0), self.times.size - 1)
