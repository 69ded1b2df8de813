"""Exception types shared across the package."""


class SepfitError(Exception):
    """Base class for all package-specific errors."""


class NonFiniteInput(SepfitError):
    """An input value or parameter is NaN or Inf."""


class ExponentOverflow(SepfitError):
    """Some |growth_rate * x| exceeds the double-precision exp guard."""


class DimensionMismatch(SepfitError):
    """Point, dataset, or model dimensions disagree."""


class LayoutMismatch(SepfitError):
    """A flat parameter vector does not match the expected layout."""


class UnknownTarget(SepfitError):
    """Requested target function is not in the registry."""


class NotDescentDirection(SepfitError):
    """Line search was handed a direction with non-negative slope."""


class LineSearchFailed(SepfitError):
    """Backtracking exhausted its budget without a sufficient decrease."""


class ConfigError(SepfitError):
    """A run-configuration file is malformed or inconsistent."""
