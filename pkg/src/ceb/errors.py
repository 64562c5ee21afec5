"""Exception types shared across the package."""


class CebError(Exception):
    """Base class for errors raised by this package."""


class FormatError(CebError):
    """A file or byte stream does not conform to its declared format."""


class RangeError(CebError):
    """A decoded value falls outside its documented range."""


class CapacityError(CebError):
    """An enumeration or search exceeded its configured budget."""
