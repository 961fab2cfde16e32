"""Exception hierarchy shared across the package.

The CLI maps these onto its exit-code contract: ConfigError -> 2,
DataError -> 3, NumericError -> 4.
"""


class ConfigError(ValueError):
    """Invalid configuration: bad flag values, malformed config files,
    unusable artifacts."""


class DataError(ValueError):
    """Invalid or malformed dataset content: bad file formats, impossible
    splits, label violations."""


class NumericError(ArithmeticError):
    """Numerical failure: non-finite values, factorizations that do not
    converge, losses that blow up."""
