"""Exception classes raised across voxelrun.

Everything derives from :class:`VoxelrunError`, which the command line
maps to exit status 1. Where a built-in exception family fits (bad
values, bad indices) the class also inherits from it so callers can
catch either.
"""


class VoxelrunError(Exception):
    """Base class for all domain errors."""


# NIfTI parsing / image access

class NiftiError(VoxelrunError):
    pass


class HeaderTooShort(NiftiError):
    pass


class BadMagic(NiftiError):
    pass


class UnsupportedDatatype(NiftiError):
    pass


class BadSizeofHdr(NiftiError):
    pass


class TruncatedData(NiftiError):
    pass


class IndexOutOfRange(VoxelrunError, IndexError):
    pass


class DropTooMany(VoxelrunError, ValueError):
    pass


# design

class MalformedLine(VoxelrunError, ValueError):
    def __init__(self, lineno, line):
        super().__init__(f"line {lineno}: expected 'onset duration amplitude', got {line!r}")
        self.lineno = lineno
        self.line = line


class NegativeOnset(VoxelrunError, ValueError):
    pass


class DtMismatch(VoxelrunError, ValueError):
    pass


class LengthMismatch(VoxelrunError, ValueError):
    pass


class UnsupportedOrder(VoxelrunError, ValueError):
    pass


class AllZeroColumn(VoxelrunError, ValueError):
    pass


# glm

class ShapeMismatch(VoxelrunError, ValueError):
    pass


class DegenerateDesign(VoxelrunError, ValueError):
    pass


class ZeroVariance(VoxelrunError, ValueError):
    pass


class ZeroContrast(LengthMismatch):
    pass


class ConstantRegressor(VoxelrunError, ValueError):
    pass


# diagnostics

class TooFewVolumes(VoxelrunError, ValueError):
    pass


class TooFewValues(VoxelrunError, ValueError):
    pass


class DegenerateAfterDrop(VoxelrunError, ValueError):
    pass


# image ops

class NonPositive(VoxelrunError, ValueError):
    pass


class NonPositiveVoxelSize(VoxelrunError, ValueError):
    pass


class SingularAffine(VoxelrunError, ValueError):
    pass


# pipeline

class PipelineSyntaxError(VoxelrunError):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class RecipeWithoutRule(PipelineSyntaxError):
    pass


class DuplicateTarget(PipelineSyntaxError):
    pass


class MissingColon(PipelineSyntaxError):
    pass


class CycleDetected(VoxelrunError):
    def __init__(self, cycle):
        super().__init__("dependency cycle: " + " -> ".join(cycle))
        self.cycle = list(cycle)


class UnknownTarget(VoxelrunError):
    pass


class RecipeFailed(VoxelrunError):
    def __init__(self, target, line, exit_code):
        super().__init__(f"recipe for {target!r} failed (exit {exit_code}): {line}")
        self.target = target
        self.line = line
        self.exit_code = exit_code


class MalformedManifest(VoxelrunError, ValueError):
    pass


class NetworkError(VoxelrunError):
    pass


class DigestMismatch(VoxelrunError):
    def __init__(self, path, expected, actual):
        super().__init__(f"{path}: expected sha256 {expected}, got {actual}")
        self.path = path
        self.expected = expected
        self.actual = actual

