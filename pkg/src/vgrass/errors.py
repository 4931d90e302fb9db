"""Exception types shared across the library."""


class VGrassError(Exception):
    """Base class for all library errors."""


class RingError(VGrassError):
    """Invalid ring descriptor, payload, or a mixed-ring operation."""


class ShapeError(VGrassError):
    """Invalid index-set construction or incompatible matrix shapes."""


class SupportError(VGrassError):
    """An operand required to be finitely supported is not."""


class PreconditionError(VGrassError):
    """A documented precondition of an operation is violated."""
