"""Initial-density library. Every profile stays strictly positive."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class Scenario:
    name: str
    defaults: dict
    profile: object  # callable(x, **params) -> density
    far_field: object  # callable(**params) -> (left, right)
    doc: str = ""

    def resolve(self, params=None):
        merged = dict(self.defaults)
        for key, value in (params or {}).items():
            if key not in merged:
                raise ConfigError(f"scenario {self.name!r} has no parameter {key!r}; "
                                  f"known: {sorted(merged)}")
            merged[key] = float(value)
        return merged

    def density(self, x, params=None):
        return np.asarray(self.profile(np.asarray(x, dtype=float), **self.resolve(params)), dtype=float)

    def extension(self, params=None):
        left, right = self.far_field(**self.resolve(params))
        return float(left), float(right)


def _constant(x, value):
    return np.full_like(x, value)


def _bump(x, background, amplitude, width, center):
    return background + amplitude * np.exp(-((x - center) / width) ** 2)


def _riemann(x, left, right, width):
    return 0.5 * (left + right) + 0.5 * (right - left) * np.tanh(x / width)


def _sinusoid(x, background, amplitude, wavenumber, envelope):
    return background + amplitude * np.sin(wavenumber * x) * np.exp(-(x / envelope) ** 2)


SCENARIOS = {
    "constant": Scenario("constant", {"value": 0.3}, _constant, lambda value: (value, value),
                         "rho0 = value"),
    "bump": Scenario("bump", {"background": 0.3, "amplitude": 0.3, "width": 1.0, "center": 0.0},
                     _bump, lambda background, **_: (background, background),
                     "gaussian bump on a background, rho_min = background"),
    "smoothed-riemann": Scenario("smoothed-riemann", {"left": 0.3, "right": 0.6, "width": 0.5},
                                 _riemann, lambda left, right, **_: (left, right),
                                 "tanh step from left to right"),
    "sinusoid": Scenario("sinusoid", {"background": 0.4, "amplitude": 0.1, "wavenumber": np.pi,
                                      "envelope": 2.0},
                         _sinusoid, lambda background, **_: (background, background),
                         "windowed sine wave on a background"),
}


def get_scenario(name):
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
