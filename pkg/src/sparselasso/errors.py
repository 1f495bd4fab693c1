"""Exception types shared across the package.

Two families only: bad parameters (caller mistakes, CLI exit code 2) and bad
data (unreadable or inconsistent inputs discovered at run time, exit code 1).
"""


class ParameterError(ValueError):
    """A parameter is outside its documented domain, or a config key is unknown."""


class CapacityError(ParameterError):
    """Requested problem size exceeds what the index arithmetic supports."""


class DataError(RuntimeError):
    """Input data is unreadable, inconsistent, or violates a stated precondition."""
