"""INI run and sweep configuration, overrides, validation and hashing.

Grammar (``configparser`` syntax, ``#`` comments, comma-separated lists):

    [scenario]  name = bump|constant|smoothed-riemann|sinusoid, plus profile parameters
    [velocity]  preset = greenshields|quadratic, v_max = 1.0
    [kernel]    kind = exponential|tabulated, epsilon, truncation_tol,
                s_table, w_table, beta  (last three for tabulated kernels)
    [model]     gamma
    [grid]      x_left, x_right, n_cells
    [run]       T, solver = characteristics|relaxation|lwr, output_times, cfl
    [picard]    window, max_iters, tol, ode_steps
    [sweep]     axis = epsilon|gamma|grid, values, reference_factor,
                target  (lwr-fine-grid, nonlocal-in-space-limit or relaxation, fixed by the axis),
                epsilon_values, gamma_values, grid_values  (per-axis lists, used
                in place of ``values`` when the matching axis is selected)
    [stability] kinds = shift, amplitude; sizes; solvers
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import AdmissibilityError, ConfigError
from .grid import Grid1D
from .model import VELOCITY_PRESETS, KernelSpec, ModelParams, admissibility
from .scenarios import get_scenario

SCHEMA_VERSION = 1
SOLVERS = ("characteristics", "relaxation", "lwr")
SWEEP_AXES = ("epsilon", "gamma", "grid")
# what each sweep axis is compared against
SWEEP_TARGETS = {"epsilon": "lwr-fine-grid", "gamma": "nonlocal-in-space-limit", "grid": "relaxation"}
PERTURBATIONS = ("shift", "amplitude")
DEFAULT_VALUES = {"epsilon": (0.1, 0.05, 0.025, 0.0125), "gamma": (0.15, 0.075, 0.0375),
                  "grid": (200, 400, 800)}


def _floats(text):
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "bump"
    scenario_params: tuple = ()
    velocity: str = "greenshields"
    v_max: float = 1.0
    kernel_kind: str = "exponential"
    epsilon: float = 0.1
    truncation_tol: float = 1e-10
    s_table: tuple = ()
    w_table: tuple = ()
    beta: float = float("nan")
    gamma: float = 0.1
    x_left: float = -5.0
    x_right: float = 5.0
    n_cells: int = 400
    T: float = 1.0
    solver: str = "relaxation"
    output_times: tuple = (0.0, 0.5, 1.0)
    cfl: float | None = None
    picard_window: float | None = None
    picard_max_iters: int = 50
    picard_tol: float = 1e-9
    picard_ode_steps: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.velocity not in VELOCITY_PRESETS:
            raise ConfigError(f"velocity preset must be one of {sorted(VELOCITY_PRESETS)}, got {self.velocity!r}")
        if not self.x_right > self.x_left:
            raise ConfigError("grid needs x_right > x_left")
        if self.n_cells < 2:
            raise ConfigError("grid needs at least two cells")
        if not self.T > 0:
            raise ConfigError(f"horizon T must be positive, got {self.T}")
        if any(t < 0 or t > self.T + 1e-12 for t in self.output_times):
            raise ConfigError(f"output times {self.output_times} must lie in [0, T={self.T}]")
        if list(self.output_times) != sorted(set(self.output_times)):
            raise ConfigError("output times must be strictly increasing")
        if self.cfl is not None and not 0 < self.cfl <= 0.9:
            raise ConfigError(f"cfl must lie in (0, 0.9], got {self.cfl}")
        get_scenario(self.scenario).resolve(dict(self.scenario_params))

    # -- derived objects ---------------------------------------------------
    def scenario_obj(self):
        return get_scenario(self.scenario)

    def kernel(self):
        if self.kernel_kind == "exponential":
            return KernelSpec.exponential(self.epsilon, self.truncation_tol)
        if self.kernel_kind == "tabulated":
            return KernelSpec(kind="tabulated", beta=self.beta, truncation_tol=self.truncation_tol,
                              s_table=self.s_table, w_table=self.w_table)
        raise ConfigError(f"kernel kind must be exponential or tabulated, got {self.kernel_kind!r}")

    def params(self):
        return ModelParams(self.gamma, self.kernel(), VELOCITY_PRESETS[self.velocity](self.v_max))

    def grid(self):
        ext = self.scenario_obj().extension(dict(self.scenario_params))
        return Grid1D.from_interval(self.x_left, self.x_right, self.n_cells, ext)

    def initial_density(self, grid=None):
        grid = grid or self.grid()
        return self.scenario_obj().density(grid.centers, dict(self.scenario_params))

    def picard(self):
        from .characteristics import PicardConfig
        kw = dict(window=self.picard_window, max_iters=self.picard_max_iters, tol=self.picard_tol,
                  ode_steps=self.picard_ode_steps)
        if self.cfl is not None:
            kw["cfl"] = self.cfl
        return PicardConfig(**kw)

    # -- identity -----------------------------------------------------------
    def to_dict(self):
        d = asdict(self)
        d["scenario_params"] = dict(self.scenario_params)
        for key in ("output_times", "s_table", "w_table"):
            d[key] = list(d[key])
        return d

    def config_hash(self):
        d = self.to_dict()
        d.pop("out_dir")
        return canonical_hash(d)

    def with_(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    axis: str = "epsilon"
    values: tuple = (0.1, 0.05, 0.025, 0.0125)
    target: str | None = None
    reference_factor: int = 4
    perturbation_kinds: tuple = PERTURBATIONS
    perturbation_sizes: tuple = (1e-2, 1e-3)
    solvers: tuple = ("characteristics", "relaxation")

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        expected = SWEEP_TARGETS[self.axis]
        if self.target is None:
            object.__setattr__(self, "target", expected)
        elif self.target != expected:
            raise ConfigError(f"a sweep over {self.axis} compares against target = {expected}, got {self.target!r}")
        v = np.asarray(self.values, dtype=float)
        if v.size == 0:
            raise ConfigError("sweep needs at least one value")
        d = np.diff(v)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ConfigError(f"sweep values must be strictly monotone, got {list(self.values)}")
        if self.reference_factor < 1:
            raise ConfigError("reference_factor must be a positive integer")
        for kind in self.perturbation_kinds:
            if kind not in PERTURBATIONS:
                raise ConfigError(f"perturbation kind must be one of {PERTURBATIONS}, got {kind!r}")
        for s in self.solvers:
            if s not in ("characteristics", "relaxation"):
                raise ConfigError(f"stability solvers must be nonlocal, got {s!r}")

    def members(self):
        """One RunConfig per sweep value, in the configured order."""
        if self.axis == "epsilon":
            return [self.base.with_(epsilon=float(v)) for v in self.values]
        if self.axis == "gamma":
            return [self.base.with_(gamma=float(v)) for v in self.values]
        return [self.base.with_(n_cells=int(v)) for v in self.values]

    def to_dict(self):
        d = asdict(self)
        d["base"] = self.base.to_dict()
        for key in ("values", "perturbation_kinds", "perturbation_sizes", "solvers"):
            d[key] = list(d[key])
        return d

    def config_hash(self):
        d = self.to_dict()
        d["base"].pop("out_dir")
        return canonical_hash(d)


def _nan_to_none(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nan_to_none(v) for v in obj]
    return obj


def canonical_json(obj):
    return json.dumps(_nan_to_none(obj), sort_keys=True, separators=(",", ":"))


def canonical_hash(obj):
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


# -- parsing ------------------------------------------------------------------

_RUN_KEYS = {
    ("velocity", "preset"): ("velocity", str),
    ("velocity", "v_max"): ("v_max", float),
    ("kernel", "kind"): ("kernel_kind", str),
    ("kernel", "epsilon"): ("epsilon", float),
    ("kernel", "truncation_tol"): ("truncation_tol", float),
    ("kernel", "s_table"): ("s_table", _floats),
    ("kernel", "w_table"): ("w_table", _floats),
    ("kernel", "beta"): ("beta", float),
    ("model", "gamma"): ("gamma", float),
    ("grid", "x_left"): ("x_left", float),
    ("grid", "x_right"): ("x_right", float),
    ("grid", "n_cells"): ("n_cells", int),
    ("run", "t"): ("T", float),
    ("run", "solver"): ("solver", str),
    ("run", "output_times"): ("output_times", _floats),
    ("run", "cfl"): ("cfl", float),
    ("picard", "window"): ("picard_window", float),
    ("picard", "max_iters"): ("picard_max_iters", int),
    ("picard", "tol"): ("picard_tol", float),
    ("picard", "ode_steps"): ("picard_ode_steps", int),
}

_SWEEP_KEYS = {
    ("sweep", "axis"): ("axis", str),
    ("sweep", "values"): ("values", _floats),
    ("sweep", "epsilon_values"): ("epsilon_values", _floats),
    ("sweep", "gamma_values"): ("gamma_values", _floats),
    ("sweep", "grid_values"): ("grid_values", _floats),
    ("sweep", "target"): ("target", str),
    ("sweep", "reference_factor"): ("reference_factor", int),
    ("stability", "kinds"): ("perturbation_kinds", lambda s: tuple(k.strip() for k in s.split(",") if k.strip())),
    ("stability", "sizes"): ("perturbation_sizes", _floats),
    ("stability", "solvers"): ("solvers", lambda s: tuple(k.strip() for k in s.split(",") if k.strip())),
}

KNOWN_SECTIONS = {"scenario", "velocity", "kernel", "model", "grid", "run", "picard", "sweep", "stability"}


def read_parser(path=None, text=None, overrides=()):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        if path is not None:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        if text is not None:
            parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key.strip(), value.strip())
    unknown = set(parser.sections()) - KNOWN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    return parser


def _collect(parser, table):
    kw = {}
    for (section, key), (name, conv) in table.items():
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                kw[name] = conv(raw)
            except ValueError:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from None
    for section in {s for s, _ in table}:
        if parser.has_section(section):
            for key in parser.options(section):
                if (section, key) not in table:
                    raise ConfigError(f"unknown key {section}.{key}")
    return kw


def run_config_from_parser(parser, out_dir=None):
    kw = _collect(parser, _RUN_KEYS)
    if parser.has_section("scenario"):
        items = dict(parser.items("scenario"))
        kw["scenario"] = items.pop("name", "bump")
        try:
            kw["scenario_params"] = tuple(sorted((k, float(v)) for k, v in items.items()))
        except ValueError:
            raise ConfigError(f"scenario parameters must be numbers, got {items}") from None
    if out_dir is not None:
        kw["out_dir"] = str(out_dir)
    return RunConfig(**kw)


def sweep_config_from_parser(parser, out_dir=None):
    base = run_config_from_parser(parser, out_dir)
    kw = _collect(parser, _SWEEP_KEYS)
    axis = kw.get("axis", "epsilon")
    per_axis = {a: kw.pop(f"{a}_values", None) for a in SWEEP_AXES}
    if per_axis.get(axis) is not None:
        kw["values"] = per_axis[axis]
    elif "values" not in kw and axis in DEFAULT_VALUES:
        kw["values"] = DEFAULT_VALUES[axis]
    return SweepConfig(base=base, **kw)


def load_run_config(path=None, text=None, overrides=(), out_dir=None):
    return run_config_from_parser(read_parser(path, text, overrides), out_dir)


def load_sweep_config(path=None, text=None, overrides=(), out_dir=None):
    return sweep_config_from_parser(read_parser(path, text, overrides), out_dir)


def validate(config):
    """Admissibility report for ``config``; raises AdmissibilityError when it fails."""
    params = config.params()
    grid = config.grid()
    report = admissibility(params, config.initial_density(grid), grid)
    if not report.ok:
        raise AdmissibilityError("; ".join(report.problems))
    return report
