"""Error types shared across the library."""


class CollinearityError(ArithmeticError):
    """Static channel is numerically parallel to the dynamic steering vector.

    The per-snapshot nuisance information matrix is singular in this
    configuration and every bound built on it diverges.
    """


class SingularMatrixError(ArithmeticError):
    """A matrix that must be inverted is singular beyond the condition limit."""


class DegenerateBoundError(ArithmeticError):
    """Expected Fisher information is not positive; the bound is undefined."""


class DegenerateProjectionError(ArithmeticError):
    """Nullspace projection of the CSI block carries no usable static-path energy."""


class ConfigError(ValueError):
    """Campaign configuration file is missing, malformed, or violates the schema."""


class EstimationStageError(RuntimeError):
    """Failure inside one stage of the estimation pipeline, tagged with the stage."""

    def __init__(self, stage: str, original: Exception):
        super().__init__(f"stage '{stage}': {original}")
        self.stage = stage
        self.original = original
