"""Exception hierarchy shared by the services, the CLI and the HTTP layer."""


class DefectlineError(Exception):
    """Base class for every error raised on purpose by defectline."""

    kind = "defectline-error"


class InvalidArgumentError(DefectlineError, ValueError):
    kind = "invalid-argument"


class ReactionParseError(InvalidArgumentError):
    kind = "reaction-parse"


class IllConditionedError(DefectlineError):
    kind = "ill-conditioned"


class StepTooLargeError(DefectlineError):
    kind = "step-too-large"


class ContourUnsafeError(DefectlineError):
    """A zero (or critical point) sits on or near the sampling contour."""

    kind = "contour-unsafe"


class UnstableDefectError(DefectlineError):
    """Higher-order point where the Jacobian vanishes."""

    kind = "unstable-defect"


class DegenerateEigenvalueError(DefectlineError):
    kind = "degenerate-eigenvalue"


class EmptyFitError(DefectlineError):
    kind = "empty-fit"
