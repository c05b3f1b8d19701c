"""Exception types raised across the library.

Every operational failure maps to one of these classes so callers can
distinguish bad inputs (usage) from degenerate data (data errors).
"""


class CardioregError(Exception):
    """Base class for all library errors."""


class EmptyInputError(CardioregError):
    """An operation received an empty point cloud or array."""


class InsufficientPointsError(CardioregError):
    """Too few (or too degenerate) points for the requested fit."""


class InvalidParameterError(CardioregError):
    """A parameter is out of its documented range."""


class NoCandidatesError(CardioregError):
    """No points satisfy the screening tolerances."""


class NoConvergenceError(CardioregError):
    """An iterative search exhausted its range without a solution."""


class NoModelError(CardioregError):
    """No admissible model was found after all iterations."""


class DegenerateAxisError(CardioregError):
    """Axis endpoints are too close to define a direction."""


class DegenerateCloudError(CardioregError):
    """Point cloud covariance is rank deficient."""


class CountMismatchError(CardioregError):
    """Corresponding sequences have different lengths."""


class DegenerateConfigurationError(CardioregError):
    """Landmark configuration has rank < 2; the fit is underdetermined."""


class SingularSystemError(CardioregError):
    """A linear system arising in an estimator is singular."""


class UnknownAlgorithmError(CardioregError):
    """Requested algorithm name is not registered."""


class ZeroVectorError(CardioregError):
    """A direction vector has (near-)zero norm."""


class GridMismatchError(CardioregError):
    """Voxel volumes do not share origin, spacing and dims."""


class EmptyFieldError(CardioregError):
    """Deformation field has no samples."""


class SingularTransformError(CardioregError):
    """Transform has no inverse."""


class ParseError(CardioregError):
    """A file could not be parsed; message carries the line number."""


class InvalidSpecError(CardioregError):
    """Phantom specification violates its invariants."""
