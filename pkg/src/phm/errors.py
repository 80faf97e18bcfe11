"""Exception types shared across the package."""


class FormatError(ValueError):
    """A file did not match the expected on-disk format."""


class ShapeError(ValueError):
    """Array shapes or channel counts are incompatible."""
