"""Exception hierarchy.

Every failure mode callers are expected to handle has a distinct class so
they can be caught individually; file-format errors carry enough context
(path, offset or key) to point at the offending bytes.
"""

from __future__ import annotations


class SplatError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(SplatError, ValueError):
    """An argument violates a documented precondition (non-finite, bad shape, out of range)."""


class ConfigurationError(SplatError):
    """Components are wired together inconsistently (e.g. dictionary/head size mismatch)."""


class UnavailableEncoderError(SplatError):
    """A prompt is not in the offline lookup and no live text encoder is configured."""


class NotFittedSceneError(SplatError):
    """An operation that needs a trained scene was called before fit/load."""


class FormatError(SplatError):
    """Base class for on-disk format violations; carries the offending file."""

    def __init__(self, message: str, *, path: str | None = None, offset: int | None = None,
                 key: str | None = None):
        ctx = []
        if path is not None:
            ctx.append(f"file={path!r}")
        if offset is not None:
            ctx.append(f"offset={offset}")
        if key is not None:
            ctx.append(f"key={key!r}")
        super().__init__(message + (f" [{', '.join(ctx)}]" if ctx else ""))
        self.path = path
        self.offset = offset
        self.key = key


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(FormatError):
    """File declares a format version this build cannot read."""


class TruncatedFileError(FormatError):
    """File ends before the declared payload, or the length footer disagrees."""


class DimensionMismatchError(FormatError):
    """Array counts/dimensions disagree between linked structures (e.g. dictionary vs embeddings)."""


class LabelOutOfRangeError(FormatError):
    """A label map contains a class index outside [0, N]."""


class MissingFileError(FormatError):
    """A file referenced by a manifest does not exist."""
