"""Exception hierarchy shared by the solvers and the CLI."""


class TrafficModelError(Exception):
    """Base class for all package errors."""

    exit_code = 3

    def to_dict(self):
        return {"error": type(self).__name__, "module": getattr(self, "module", None), "message": str(self)}


class AdmissibilityError(TrafficModelError, ValueError):
    """Model parameters or initial data violate the well-posedness hypotheses."""

    exit_code = 2
    module = "model_core"


class InvalidModelError(AdmissibilityError):
    """Velocity law or kernel fails its structural assumptions."""


class OutOfRangeError(TrafficModelError, ValueError):
    exit_code = 2
    module = "model_core"


class NumericalError(TrafficModelError, RuntimeError):
    exit_code = 3


class FutureSampleError(NumericalError):
    module = "grid_field"


class TruncationError(NumericalError):
    module = "nonlocal_quadrature"


class KernelKindError(NumericalError):
    module = "nonlocal_quadrature"


class NoContractionError(NumericalError):
    module = "characteristic_solver"


class StepTooLargeError(NumericalError):
    module = "characteristic_solver"


class CFLError(NumericalError):
    module = "relaxation_solver"


class PositivityError(NumericalError):
    module = "relaxation_solver"


class SupportError(NumericalError):
    module = "diagnostics"


class ConfigError(TrafficModelError, ValueError):
    exit_code = 2
    module = "experiment_cli"
