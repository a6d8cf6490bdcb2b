"""Exception hierarchy.

Input errors (bad files, bad geometry handed in by the caller) derive from
``InputError``; the CLI maps those to exit code 1. ``InvariantViolation`` maps
to exit code 2.
"""


class DensifyError(Exception):
    pass


class InputError(DensifyError):
    pass


class InvariantViolation(DensifyError):
    pass


class NonPositiveDepth(InputError, ValueError):
    pass


class SingularMatrix(InputError, ValueError):
    pass


class ConfigError(InputError, ValueError):
    pass


# kitti_io
class NotFound(InputError, FileNotFoundError):
    pass


class WrongBitDepth(InputError):
    pass


class WrongChannelCount(InputError):
    pass


class ParseError(InputError):
    pass


class DepthOverflow(InputError, ValueError):
    pass


class DimensionMismatch(InputError, ValueError):
    pass


# geometry
class DegenerateGeometry(DensifyError, ValueError):
    pass


class SingularSample(DegenerateGeometry):
    pass


class DegenerateHull(DegenerateGeometry):
    pass


class RayParallelToPlane(DensifyError, ValueError):
    pass


class ImageTooSmall(InputError, ValueError):
    pass


# fill / metrics
class EmptyInput(InputError, ValueError):
    pass


class MissingPrediction(InputError, ValueError):
    def __init__(self, count: int):
        super().__init__(f"prediction is missing on {count} ground-truth pixels")
        self.count = count

    def __reduce__(self):            # survive the trip back from worker processes
        return type(self), (self.count,)


class EmptyGroundTruth(InputError, ValueError):
    pass


class SceneError(InputError, ValueError):
    pass


class PatchBehindCamera(SceneError):
    pass
