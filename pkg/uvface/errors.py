"""Exception hierarchy for uvface."""

from typing import List, Optional


class UVFaceError(Exception):
    """Base class for every error raised by uvface."""


class DomainError(UVFaceError, ValueError):
    """An input lies outside the mathematical domain of an operation."""


class SampleRangeError(UVFaceError, IndexError):
    """A sampling coordinate falls outside the map (no implicit clamping)."""


class ShapeMismatchError(UVFaceError, ValueError):
    """Array dimensions or masks of two inputs do not agree."""


class DegenerateGeometryError(UVFaceError, ValueError):
    """A triangle or vertex star has zero area."""

    def __init__(self, message: str, vertex: Optional[int] = None):
        super().__init__(message)
        self.vertex = vertex


class EmptyCoverageError(UVFaceError):
    """No pixel is covered by the rendered mesh."""


class StateMismatchError(UVFaceError):
    """A backward pass received state that does not belong to the forward call."""


class FitDivergedError(UVFaceError):
    """The optimiser found no finite loss for several iterations in a row."""

    def __init__(self, message: str, trace: List[float]):
        super().__init__(message)
        self.trace = list(trace)


class FormatError(UVFaceError, ValueError):
    """A text file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnsupportedFeatureError(FormatError):
    """A file uses a feature uvface deliberately does not support."""


class ModelFileError(UVFaceError):
    """The binary model container is invalid."""


class BadMagicError(ModelFileError):
    """The container does not start with the expected magic bytes."""


class VersionMismatchError(ModelFileError):
    """The container version is not supported."""


class TruncatedSectionError(ModelFileError):
    """A section is shorter than its declared size."""


class ConsistencyError(ModelFileError):
    """Two fields of a model disagree on a dimension."""
