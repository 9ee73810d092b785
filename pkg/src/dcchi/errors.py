"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, NumericError -> 3,
FormatError -> 4. Everything else is a plain bug.
"""


class DcchiError(Exception):
    pass


class ShapeError(DcchiError, ValueError):
    """Operand extents are inconsistent with the operation."""


class NumericError(DcchiError, ArithmeticError):
    """Non-finite values or an ill-posed numeric state."""


class StateError(DcchiError, RuntimeError):
    """Operation invoked on an object in the wrong lifecycle state."""


class FormatError(DcchiError, ValueError):
    """A file does not conform to its declared byte layout."""


class ConfigError(DcchiError, ValueError):
    """A run configuration is missing, malformed, or contradictory."""
