"""Exception types shared across the package."""

from __future__ import annotations


class SpernerLabError(Exception):
    """Base class for all package errors."""


class NonUniformFamilyError(SpernerLabError, ValueError):
    """A single-layer operation received members from more than one layer."""

    def __init__(self, layers):
        self.layers = sorted(layers)
        super().__init__(f"non-uniform family: members span layers {self.layers}")


class PreconditionError(SpernerLabError, ValueError):
    """An operation's hypothesis does not hold for the given input."""


class GuardExceeded(SpernerLabError):
    """A configured size guard would be exceeded."""

    def __init__(self, what: str, value: int, guard: int, hint: str = ""):
        self.what = what
        self.value = value
        self.guard = guard
        msg = f"{what} = {value} exceeds guard {guard}"
        if hint:
            msg += f"; {hint}"
        super().__init__(msg)


class RetryExhausted(SpernerLabError):
    """Rejection sampling failed to meet a condition within the retry cap."""

    def __init__(self, stage: str, condition: str, retries: int):
        self.stage = stage
        self.condition = condition
        self.retries = retries
        super().__init__(f"{stage}: condition {condition!r} not met after {retries} draws")
