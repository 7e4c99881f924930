"""Solvers and diagnostics for a traffic model whose velocity depends on a
delayed, look-ahead weighted average of the density."""
from .characteristics import PicardConfig, solve_characteristics
from .config import RunConfig, SweepConfig, load_run_config, load_sweep_config
from .diagnostics import (DiagnosticsReport, EntropyPair, diagnose, entropy_eta, entropy_psi,
                          entropy_residual, q_rho_l1, stability_ratio)
from .errors import (AdmissibilityError, ConfigError, NumericalError, OutOfRangeError, TrafficModelError)
from .grid import Grid1D, SpaceTimeField, SpaceTimeSolution
from .lwr import godunov_flux, solve_lwr
from .model import (KernelSpec, ModelParams, VelocityModel, admissibility, g, g_inverse, gamma_max,
                    greenshields, quadratic, rho_bounds)
from .quadrature import compute_dy_q, compute_q, compute_q_exponential
from .relaxation import solve_relaxation

__version__ = "0.1.0"
