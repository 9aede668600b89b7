"""Exception types shared across the library."""


class DceeError(Exception):
    """Base class for all library errors."""


class InvalidInputError(DceeError):
    """Non-finite or malformed input to a numerical routine."""


class CurvatureViolationError(DceeError):
    """Parameter vector does not satisfy the concavity requirement of the
    optimal-condition map (theta[0] must stay at or below -curvature_floor)."""


class InfeasibleCandidateError(DceeError):
    """Candidate input drives a predicted ensemble member outside the
    admissible parameter region; the objective is undefined there."""


class ConfigurationError(DceeError):
    """Invalid scenario, ensemble, or solver configuration."""


class RankDeficiencyError(DceeError):
    """Normal equations are singular at zero damping."""


class RateUndefinedError(DceeError):
    """Local contraction rate requires a positive definite curvature matrix."""


class SolverFailureError(DceeError):
    """Inner loop could not produce a usable step; carries the partial report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
