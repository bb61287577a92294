"""Exception hierarchy shared by all cbmorph modules."""


class CbmorphError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(CbmorphError, ValueError):
    pass


class DecompositionError(CbmorphError):
    """A matrix factorization failed (e.g. Cholesky of a non-PD mass)."""


class SingularSystemError(CbmorphError):
    """Linear system too close to singular to solve reliably."""

    def __init__(self, message, rcond=None, frequency=None):
        super().__init__(message)
        self.rcond = rcond
        self.frequency = frequency


class ParameterError(CbmorphError, ValueError):
    pass


class IllConditionedProjectionError(CbmorphError):
    """The common-basis projection matrix cannot be inverted."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class GeometryError(CbmorphError, ValueError):
    pass


class DegenerateLabelsError(CbmorphError, ValueError):
    pass


class InsufficientDataError(CbmorphError, ValueError):
    pass


class ReconstructionDefectError(CbmorphError):
    pass


class DuplicateInputError(CbmorphError, ValueError):
    pass


class FitError(CbmorphError):
    pass


class ConnectivityError(CbmorphError, ValueError):
    pass


class DegenerateSpecError(CbmorphError, ValueError):
    pass


class ConfigError(CbmorphError, ValueError):
    pass
