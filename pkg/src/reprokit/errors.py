"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class ReproError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ReproError):
    """A value violates a documented invariant (bad hex, unsorted list, ...)."""


class ParseError(ReproError):
    """Attestation or metadata text does not conform to the wire format."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FormatError(ReproError):
    """A binary container (gzip, tar, zip) is malformed.

    ``offset`` locates the problem in the input where known.
    """

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (offset {offset})"
        super().__init__(message)
        self.offset = offset


class StructuralError(ReproError):
    """Input layout breaks a structural precondition (subdirectory in a flat
    artifact dir, missing build entry point, staging collision)."""


class StoreError(ReproError):
    """Attestation store problem: key pinning conflict, unregistered builder,
    corrupted entry, or an empty tally."""


class FixtureError(ReproError):
    """Fixture generation or remediation cannot proceed."""
