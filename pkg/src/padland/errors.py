"""Exception types shared across the pipeline."""


class PadlandError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PadlandError, ValueError):
    """Malformed raster, size mismatch, or bad parameter value."""


class ExtractionError(PadlandError):
    """Candidate region produced no usable foreground."""


class CornerShortageError(PadlandError):
    """Fewer corners found than requested."""


class AmbiguousGroupingError(PadlandError):
    """Two corner subsets tie on convex area beyond tolerance."""


class AmbiguousOrderError(PadlandError):
    """Two corners share the same angle about the centroid."""


class DepthError(PadlandError, ValueError):
    """Non-positive depth passed to the interaction matrix."""


class DegenerateConfigError(PadlandError):
    """Feature configuration too ill-conditioned to solve."""


class ConfigError(PadlandError, ValueError):
    """Bad key, value, or file in the run configuration."""


class SetupError(PadlandError):
    """Closed-loop scenario cannot start (e.g. pad not visible)."""
