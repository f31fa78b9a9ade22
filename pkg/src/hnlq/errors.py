"""Exceptions shared across the package."""


class UnencodableError(RuntimeError):
    """Raised when the overload retry loop runs out of scaling attempts."""
