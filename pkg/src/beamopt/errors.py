"""Exception types shared across the package."""


class BeamoptError(Exception):
    """Base class for numerical failures raised by this package."""


class SingularMatrixError(BeamoptError):
    """A Cholesky pivot fell below tolerance: matrix not positive definite."""


class DegenerateBeamformerError(BeamoptError):
    """All-zero beamformer set where a power projection was required."""


class BracketingError(BeamoptError):
    """A bracketing or bisection search failed to locate its target."""
