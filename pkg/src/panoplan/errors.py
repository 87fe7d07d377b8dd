"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1, input
parsing/validation problems exit 2, numerical failures exit 3.
"""


class PanoplanError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PanoplanError):
    """A configuration value is missing, malformed, or out of range."""


class SceneParseError(PanoplanError):
    """A scene document could not be parsed."""


class SceneValidationError(PanoplanError):
    """A parsed scene violates a structural invariant.

    The message names the violated invariant and the offending panorama
    or field.
    """


class MissingGroundTruthError(PanoplanError):
    """An operation that requires ground-truth poses got a scene without them."""


class DegenerateInputError(PanoplanError):
    """Input is too small or too collapsed for the requested operation."""


class SolverFailureError(PanoplanError):
    """An iterative solver produced a non-finite value.

    Attributes:
        iteration: index of the iteration at which the failure surfaced.
    """

    def __init__(self, message: str, iteration: int = -1):
        super().__init__(message)
        self.iteration = iteration
