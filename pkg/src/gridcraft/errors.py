"""Exception hierarchy shared by all gridcraft modules.

Processing failures (anything a caller may want to catch and map to an
exit code) derive from :class:`GridcraftError`. Genuine programming errors
keep raising plain ``ValueError``/``TypeError``.
"""

from __future__ import annotations


class GridcraftError(Exception):
    """Base class for all recoverable gridcraft failures."""


class UnsupportedFormat(GridcraftError):
    """Raster file exists but is not a format this library decodes."""


class CorruptData(GridcraftError):
    """Raster file is recognized but its payload cannot be decoded."""


class OutOfBounds(GridcraftError):
    """A rectangle reaches outside the image it indexes."""


class DegenerateExtent(GridcraftError):
    """Standard deviation requested across an axis of length 1."""


class TooShort(GridcraftError):
    """Profile has too few samples for the requested operation."""


class BadWindow(GridcraftError):
    """Smoothing window is even, non-positive, or longer than the profile."""


class FlatProfile(GridcraftError):
    """Profile has no dynamic range, so a relative threshold is undefined."""


class NoStructure(GridcraftError):
    """No interior minima / gaps were found along an axis."""


class InvalidMethod(GridcraftError):
    """Method constructed with an inconsistent threshold setting."""


class MethodMismatch(GridcraftError):
    """Method cannot be used with the requested operation."""


class TemplateTooLarge(GridcraftError):
    """Rendered template does not fit inside the searched image."""


class GeometricDistortion(GridcraftError):
    """Best template-match score fell below the acceptance cutoff."""

    def __init__(self, message: str, score: float, offset: tuple[int, int]):
        super().__init__(message)
        self.score = score
        self.offset = offset


class TooFewCuts(GridcraftError):
    """Not enough interior cuts to estimate a period."""


class DimensionMismatch(GridcraftError):
    """Grid extents disagree with the image they are applied to."""


class AxisMismatch(GridcraftError):
    """Two grid-line sets cannot be compared (axis or extent differs)."""


class SpecInvalid(GridcraftError):
    """Synthetic array description fails validation."""
