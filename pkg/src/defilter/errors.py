"""Exception types shared across the toolkit."""


class DefilterError(Exception):
    """Base class for all toolkit errors."""


class InvalidAsset(DefilterError):
    """Overlay asset is malformed (bad anchors, channels, or placement)."""


class DegeneratePlacement(DefilterError):
    """Anchored overlay lands entirely outside the target image."""


class DegenerateLandmarks(DefilterError):
    """Landmark set spans no area (identical or collinear points)."""


class ShapeError(DefilterError):
    """Array shapes do not agree where they must."""


class InvalidSubdivision(DefilterError):
    """Requested more subregions than the polygon has pixels."""


class InvalidArgument(DefilterError):
    """Argument outside its documented domain."""


class ConfigError(DefilterError):
    """Configuration value is invalid or inconsistent."""


class NoData(DefilterError):
    """An operation that needs at least one sample got none."""


class DegenerateRange(DefilterError):
    """Min-max normalization over a zero-width native range."""


class ZeroVector(DefilterError):
    """Embedding of a zero-variance image has no direction."""


class IoError(DefilterError):
    """Filesystem write failed (unwritable output root etc.)."""


class StageDependencyError(DefilterError):
    """A pipeline stage ran before its upstream artifacts exist."""


class StaleArtifactError(DefilterError):
    """An upstream artifact was produced under a different config."""


class UncheckedModelWarning(UserWarning):
    """Inference requested from a model with no recorded training."""
