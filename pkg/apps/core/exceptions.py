"""
Exception hierarchy for the ADMM laboratory.

Parameter validation uses django.core.exceptions.ValidationError (see validators.py);
the classes below cover failures of the numerical pipeline itself.
"""


class AdmmError(Exception):
    """Base class for all numerical errors raised by the project."""


class AssemblyError(AdmmError):
    """Sparse assembly received an index outside the matrix."""


class MeshError(AdmmError):
    """Invalid mesh request or a field that does not match its mesh."""


class SolverError(AdmmError):
    """
    Iterative linear solver did not reach its tolerance.

    Attributes:
        residual: Relative residual ||Ax - b|| / ||b|| at the last iterate
        iterations: Number of iterations performed
    """

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class RunAborted(AdmmError):
    """
    A subproblem failed inside an ADMM run.

    The partial report (all iterations completed before the failure) is
    attached so callers can still inspect or export the trace.
    """

    def __init__(self, message: str, report):
        super().__init__(message)
        self.report = report


class ReferenceNotConverged(AdmmError):
    """Reference computation hit its iteration cap before the tolerance."""
