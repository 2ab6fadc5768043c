"""Exception types raised across the package.

Every documented failure path maps onto one of these, so callers (and the
CLI) can turn any of them into a one-line diagnostic and a nonzero exit.
"""


class FramecastError(Exception):
    """Base class for all package errors."""


class IngestionError(FramecastError):
    """A frame image could not be read or decoded; message names the file."""


class DatasetError(FramecastError):
    """A dataset/manifest violates its preconditions (too few frames, missing entry, ...)."""


class SceneSpecError(FramecastError):
    """A synthetic scene spec violates its invariants (shape leaves canvas, overlap, ...)."""


class FlowFormatError(FramecastError):
    """A .flo file is malformed; message includes the byte offset of the problem."""


class StructuralError(FramecastError):
    """Tensor shapes or channel counts do not match a module's contract."""


class CheckpointError(FramecastError):
    """A checkpoint is unreadable or incompatible with the requested operation."""


class NonFiniteLossError(FramecastError):
    """A training loss became NaN/Inf; message carries the offending breakdown."""


class ProbeError(FramecastError):
    """The representation probe was asked to fit on degenerate labels."""
