"""Exception hierarchy shared by every module of the toolkit."""

from __future__ import annotations


class ColdPlasmaError(Exception):
    """Base class; the CLI maps subclasses to nonzero exit codes."""

    exit_code = 1


class ZeroExternalField(ColdPlasmaError):
    """|B_ext| vanishes where the anisotropy direction b is needed."""

    exit_code = 10


class DegenerateDirection(ColdPlasmaError):
    """A direction vector handed to the Stix frame is not of unit length."""

    exit_code = 11


class SingularShift(ColdPlasmaError):
    """Shifted collision/rotation matrix is numerically singular (needs nu > 0)."""

    exit_code = 12


class NonPositiveZeta(ColdPlasmaError):
    """Uniform lower bound of Re(eig B_alpha) is not positive."""

    exit_code = 13


class ShapeMismatch(ColdPlasmaError):
    exit_code = 14


class CFLViolation(ColdPlasmaError):
    exit_code = 15


class IterativeSolveFailure(ColdPlasmaError):
    """Krylov solver hit its iteration cap; carries the achieved residual."""

    exit_code = 16

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class NonAdmissibleLambda(ColdPlasmaError):
    exit_code = 17


class NearSingularShift(ColdPlasmaError):
    """Shift sits on (or numerically next to) an eigenvalue of the generator."""

    exit_code = 18


class EigensolveFailure(ColdPlasmaError):
    exit_code = 19


class ConvergenceFailure(ColdPlasmaError):
    exit_code = 20


class DegenerateSeries(ColdPlasmaError):
    exit_code = 21


class UnsupportedFace(ColdPlasmaError):
    exit_code = 22


class IncompatibleInitialData(ColdPlasmaError):
    exit_code = 23


class ParseError(ColdPlasmaError):
    """Scenario document error located by a JSON pointer."""

    exit_code = 2

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class ValidationError(ColdPlasmaError):
    exit_code = 3

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}" if pointer else message)
        self.pointer = pointer
