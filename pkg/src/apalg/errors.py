"""Exception hierarchy shared by all apalg modules."""


class APError(Exception):
    """Base class for every error raised by apalg."""


class InvalidInputError(APError, ValueError):
    pass


class ResourceError(APError):
    """Symbolic computation would exceed the configured term-count caps.

    Callers can fall back to pointwise numeric evaluation.
    """


class SingularLeadingCoefficientError(APError):
    pass


class SolverFailureError(APError):
    pass


class NumericalDegeneracyError(APError):
    """A ring zero test could not be decided at working precision."""


class AmbiguousBranchError(APError):
    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class ContinuationError(APError):
    pass


class ZeroOnBoundaryError(APError):
    def __init__(self, message, z=None):
        super().__init__(message)
        self.z = z


class PrecisionError(APError):
    pass


class PreconditionError(APError):
    pass


class RadiusTooLargeError(PreconditionError):
    def __init__(self, message, K=None, r=None):
        super().__init__(message)
        self.K = K
        self.r = r


class CoverError(APError):
    """A produced cover failed its own re-verification (a bug, not bad input)."""


class InconsistencyError(APError):
    pass


class InsufficientDataError(APError):
    pass


class VerificationError(APError):
    """Base for failures of a verification claim (CLI exit code 3)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DichotomyViolationError(VerificationError):
    def __init__(self, message, report=None, z=None):
        super().__init__(message, report)
        self.z = z


class LimitMismatchError(VerificationError):
    pass


class ProblemSyntaxError(APError):
    def __init__(self, message, line=None, column=None):
        loc = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(loc + message)
        self.line = line
        self.column = column


class ProblemSemanticError(APError):
    def __init__(self, message, key=None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
