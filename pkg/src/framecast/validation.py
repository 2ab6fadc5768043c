"""Input-validation helpers shared by the network modules and the estimator.

All checks raise :class:`~framecast.errors.StructuralError` (shape contracts)
or :class:`~framecast.errors.DatasetError` (sequence-level preconditions) so
error handling stays uniform across the package.
"""

from __future__ import annotations

import numpy as np
import torch

from .errors import DatasetError, StructuralError

DOWNSAMPLE_FACTOR = 8  # encoder reduces H and W by this factor


MIN_FRAME_SIZE = 16  # conv pyramids need >= 2x2 maps at depth


def check_spatial_size(height: int, width: int) -> None:
    if height % DOWNSAMPLE_FACTOR or width % DOWNSAMPLE_FACTOR:
        raise StructuralError(
            f"frame size {height}x{width} must be a multiple of {DOWNSAMPLE_FACTOR} "
            "in both dimensions"
        )
    if height < MIN_FRAME_SIZE or width < MIN_FRAME_SIZE:
        raise StructuralError(
            f"frame size {height}x{width} is below the {MIN_FRAME_SIZE}-pixel minimum"
        )


def check_image_batch(x: torch.Tensor, channels: int, name: str = "input") -> None:
    """Require a (B, channels, H, W) tensor."""
    if x.ndim != 4 or x.shape[1] != channels:
        raise StructuralError(
            f"{name} must have shape (B, {channels}, H, W), got {tuple(x.shape)}"
        )


def check_same_shape(a: torch.Tensor, b: torch.Tensor, names: str = "inputs") -> None:
    if a.shape != b.shape:
        raise StructuralError(f"{names} must share a shape: {tuple(a.shape)} vs {tuple(b.shape)}")


def check_flow_batch(flow: torch.Tensor, name: str = "flow") -> None:
    check_image_batch(flow, 2, name)
    if not torch.isfinite(flow).all():
        raise StructuralError(f"{name} contains non-finite values")


def check_sequence_batch(frames: torch.Tensor) -> None:
    """Require a (B, T, 3, H, W) tensor with T >= 2 and H, W multiples of 8."""
    if frames.ndim != 5 or frames.shape[2] != 3:
        raise StructuralError(
            f"sequence batch must have shape (B, T, 3, H, W), got {tuple(frames.shape)}"
        )
    if frames.shape[1] < 2:
        raise StructuralError("sequence must contain at least 2 frames")
    check_spatial_size(frames.shape[3], frames.shape[4])


def as_sequence_array(frames: np.ndarray | list, name: str = "X") -> np.ndarray:
    """Coerce one sequence to a float32 (T, 3, H, W) array in [-1, 1]."""
    arr = np.asarray(frames, dtype=np.float32)
    if arr.ndim != 4 or arr.shape[1] != 3:
        raise DatasetError(f"{name} must be a (T, 3, H, W) array, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise DatasetError(f"{name} must contain at least 2 frames, got {arr.shape[0]}")
    if arr.min() < -1.0 - 1e-6 or arr.max() > 1.0 + 1e-6:
        raise DatasetError(f"{name} values must lie in [-1, 1] (normalized frames)")
    check_spatial_size(arr.shape[2], arr.shape[3])
    return arr
