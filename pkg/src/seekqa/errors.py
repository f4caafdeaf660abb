"""Shared exception types."""


class DataError(ValueError):
    """Malformed or inconsistent input data (bad line, wrong field, dim mismatch)."""


class UsageError(ValueError):
    """Invalid arguments or configuration."""
