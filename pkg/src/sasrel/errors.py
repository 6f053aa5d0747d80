"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Distribution or configuration parameters outside their admissible domain."""


class DomainError(ValueError):
    """A sample or evaluation point lies outside the supported domain."""


class DimensionError(ValueError):
    """Array shapes are inconsistent with the model dimension."""


class NumericalError(RuntimeError):
    """A numerical procedure failed beyond recovery (singular system, failed factorization)."""
