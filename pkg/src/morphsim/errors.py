"""Domain exceptions shared across the package."""


class MorphsimError(Exception):
    """Base class for all domain errors."""


class InvalidDesign(MorphsimError):
    """A grid design violates the 3x3-lattice / 12-beam topology rules."""


class ContiguityFailure(MorphsimError):
    """A beam end corner has no coincident joint corner (malformed geometry)."""


class OracleDiverged(MorphsimError):
    """Constraint projection failed to settle; carries the frame index."""

    def __init__(self, message, frame=None):
        super().__init__(message)
        self.frame = frame


class SamplerExhausted(MorphsimError):
    """Rejection sampling failed to produce a valid design."""


class NormalizerUnderdetermined(MorphsimError):
    """Fewer samples than dimensions; PCA basis not identifiable."""


class ShapeError(MorphsimError):
    """Array width does not match the expected layout."""


class GraphError(MorphsimError):
    """Unsupported primitive in a gradient composition."""


class NonFiniteGradient(MorphsimError):
    """NaN/inf gradient; the training batch is aborted."""


class RolloutDiverged(MorphsimError):
    """Non-finite feature during rollout; carries the frame index."""

    def __init__(self, message, frame=None):
        super().__init__(message)
        self.frame = frame
