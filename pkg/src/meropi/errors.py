"""Exception types shared across the package."""

from __future__ import annotations


class MeropiError(Exception):
    """Base class for all package-specific errors."""


class GermParseError(MeropiError):
    """Germ expression rejected, with the offending position."""

    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} (at position {position})")
        self.position = position


class NonlinearPoleError(GermParseError):
    """A denominator factor does not normalize to a power of a linear form."""


class OnPoleHyperplaneError(MeropiError):
    """Evaluation point lies on a pole hyperplane."""


class OnPoleError(MeropiError):
    """A continuation parameter sits within guard distance of a pole."""


class QuadratureError(MeropiError):
    """Quadrature failed to converge within the refinement budget."""


class ExtractionError(MeropiError):
    """Contour extraction failed to stabilize under node doubling."""

    def __init__(self, message: str, last_two=None) -> None:
        super().__init__(message)
        self.last_two = last_two


class PoleMismatchError(ExtractionError):
    """Cleared pairing fails Cauchy decay: the declared pole lattice is wrong."""


class UnsupportedFunctionError(MeropiError):
    """Requested analytic function is outside the catalog."""


class UnsupportedPairError(MeropiError):
    """Cone-cell pair has no exact closed form in the catalog."""


class ValidityRegionError(MeropiError):
    """Amplitude request matches none of the supported evaluation routes."""


class ConfigError(MeropiError):
    """Config file failed schema validation."""
