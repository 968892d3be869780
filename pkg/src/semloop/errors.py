"""Exception types shared across the package."""


class SemloopError(Exception):
    """Base class for all package errors."""


class DegenerateConfiguration(SemloopError):
    """Point set too degenerate to constrain an alignment (collinear or < 3)."""


class BehindCamera(SemloopError):
    """Point lies behind the image plane."""


class ZeroNormDescriptor(SemloopError):
    """Bag-of-words vector has zero norm and cannot be normalized."""


class ClassSetMismatch(SemloopError):
    """Class distributions are defined over different class sets."""


class EmptyDescriptorSet(SemloopError):
    """Appearance comparison requested on an empty descriptor set."""


class DuplicateKeyframe(SemloopError):
    """Keyframe id was already integrated."""


class UnknownKeyframe(SemloopError):
    """Keyframe id was never integrated."""


class UnknownVertex(SemloopError):
    """Vertex id not present in the (sub)graph."""


class KeyframeNotInTrajectory(SemloopError):
    """Loop keyframe ids fall outside the given trajectory."""


class LengthMismatch(SemloopError):
    """Trajectories of different length cannot be compared."""


class PlacementFailure(SemloopError):
    """Could not place the requested objects inside the room."""


class MalformedRecord(SemloopError):
    """Dataset line failed to parse.  Carries the 1-based line number."""

    def __init__(self, line_number, message):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number
