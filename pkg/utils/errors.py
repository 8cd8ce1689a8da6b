"""
Solver Errors
Exception hierarchy shared by the geometry, field and solver layers
"""


class LoopSolverError(Exception):
    """Base class for every error raised by the loop solver"""


# Configuration

class ConfigurationError(LoopSolverError, ValueError):
    """Run configuration is malformed or inconsistent"""


class FieldConfigurationError(ConfigurationError):
    """A curvature field failed its structural validation"""


class WrongKind(LoopSolverError, ValueError):
    """Operation called on a field of the wrong kind"""


class LoopFormatError(ConfigurationError):
    """A loop file could not be parsed"""


# Numerics

class QuadratureFailure(LoopSolverError, ArithmeticError):
    """Adaptive quadrature did not reach its tolerance within budget"""


class DegenerateSpeed(LoopSolverError, ValueError):
    """Parametrization speed vanishes somewhere on the loop"""


class NearConstantLoop(LoopSolverError, ValueError):
    """Loop is too close to a constant for the energy to be differentiable"""


class TooCloseToCurve(LoopSolverError, ValueError):
    """Winding number requested at a point on (or next to) the curve"""


class IndexAmbiguity(LoopSolverError, ArithmeticError):
    """Index map still has ambiguous cells at the finest resolution"""


# Paths

class ZeroAverage(LoopSolverError, ValueError):
    """Periodic field has vanishing cell average"""


class NoBumpFound(LoopSolverError, ValueError):
    """No disc with negative energy around a favorable point"""


class NoNegativeEndpoint(LoopSolverError, ValueError):
    """Endpoint search for a constant-at-infinity field failed"""


class EndpointViolation(LoopSolverError, RuntimeError):
    """Path endpoint energy is not negative"""


# Solvers

class CollapseToConstant(LoopSolverError, RuntimeError):
    """Descent shrank the loop to a constant"""

    def __init__(self, message: str, length_history=None):
        super().__init__(message)
        self.length_history = list(length_history or [])


class SignMismatch(LoopSolverError, ValueError):
    """Winding multiplicity sign disagrees with sign(lambda * K0)"""
