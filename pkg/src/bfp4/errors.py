"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: UsageError -> 2,
FormatError -> 2, InvariantViolation -> 1.
"""


class UsageError(ValueError):
    """Caller passed arguments that violate an operation's contract."""


class FormatError(ValueError):
    """On-disk data is malformed (bad magic, version, or truncation)."""


class InvariantViolation(RuntimeError):
    """An internal consistency check failed (never a silent pass)."""
