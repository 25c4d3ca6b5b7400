"""Shared exception types.

The CLI maps these onto exit codes (invariant violation -> 2, resource
budget -> 3); plain ValueError covers malformed input (-> 4).
"""


class InvariantViolationError(RuntimeError):
    """A checked internal invariant failed at runtime."""


class ResourceLimitError(RuntimeError):
    """An operation refused to start, or stopped, because it would exceed
    an explicit enumeration/time budget.

    May carry a partial result in ``partial``.
    """

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
