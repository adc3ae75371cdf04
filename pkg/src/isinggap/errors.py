"""Exception hierarchy. CLI exit codes hang off these classes."""


class IsingGapError(Exception):
    exit_code = 1


class DimensionError(IsingGapError, ValueError):
    exit_code = 2


class ModelFormatError(IsingGapError, ValueError):
    exit_code = 2


class CapExceededError(IsingGapError):
    """Problem size is above the hard cap of an exact (2^n-state) routine."""

    exit_code = 3


class NumericalError(IsingGapError):
    """An iterative method failed; ``residual`` is what it achieved."""

    exit_code = 4

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class EigenSolverError(NumericalError):
    pass


class GraphGenerationError(NumericalError):
    pass


class CertificateUnavailable(IsingGapError):
    """The spread of the canonical coupling matrix is >= 1."""

    exit_code = 5


class PropertyCheckError(IsingGapError):
    exit_code = 5
