"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and NumericError to exit code 3;
everything else is a plain crash.
"""


class SpdError(Exception):
    """Base class for package errors."""


class ShapeError(SpdError, ValueError):
    """Tensor or weight shapes do not line up. Message names both shapes."""


class ContractError(SpdError, ValueError):
    """A documented precondition was violated by the caller."""


class InputError(SpdError, ValueError):
    """Bad user-supplied data (out-of-vocab token, malformed file, ...)."""


class ConfigError(SpdError, ValueError):
    """Invalid or inconsistent run configuration."""


class NumericError(SpdError, ArithmeticError):
    """Numerical failure at runtime (NaN loss, NaN gradient, divergence)."""
