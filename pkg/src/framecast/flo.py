"""Middlebury ``.flo`` flow-file I/O and flow-field visualization.

File layout (little-endian regardless of host):

* bytes 0-3    float32 sanity value 202021.25
* bytes 4-7    int32 width
* bytes 8-11   int32 height
* bytes 12-    row-major interleaved (u, v) float32 pairs, one per pixel

A :class:`FlowField` stores sampling offsets: warping samples the source
frame at ``(x + u, y + v)``. Positive ``u`` points right, positive ``v``
points down, both in pixels.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FlowFormatError

FLO_MAGIC = 202021.25
_HEADER = struct.Struct("<fii")

FLOW_CONVENTION = "sampling-offset"


@dataclass
class FlowField:
    """Per-pixel 2-channel displacement grid, in pixels."""

    u: np.ndarray
    v: np.ndarray
    convention: str = field(default=FLOW_CONVENTION)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float32)
        self.v = np.asarray(self.v, dtype=np.float32)
        if self.u.ndim != 2 or self.u.shape != self.v.shape:
            raise FlowFormatError(
                f"u and v must be 2-D grids of equal shape, got {self.u.shape} vs {self.v.shape}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.u).all() and np.isfinite(self.v).all())

    def to_array(self) -> np.ndarray:
        """Channel-first (2, H, W) float32 view used by the network modules."""
        return np.stack([self.u, self.v], axis=0)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "FlowField":
        arr = np.asarray(arr, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[0] != 2:
            raise FlowFormatError(f"expected a (2, H, W) array, got shape {arr.shape}")
        return cls(u=arr[0], v=arr[1])

    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.u.astype(np.float64) ** 2 + self.v.astype(np.float64) ** 2)


def write_flo(flow: FlowField, path) -> None:
    """Write ``flow`` to ``path`` in the binary layout above."""
    if not flow.is_finite():
        bad = np.flatnonzero(~(np.isfinite(flow.u) & np.isfinite(flow.v)))
        offset = 12 + int(bad[0]) * 8
        raise FlowFormatError(f"refusing to write non-finite flow (first bad pixel at byte offset {offset})")
    h, w = flow.shape
    data = np.empty((h, w, 2), dtype="<f4")
    data[..., 0] = flow.u
    data[..., 1] = flow.v
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FLO_MAGIC, w, h))
        fh.write(data.tobytes())


def read_flo(path) -> FlowField:
    """Read a ``.flo`` file; raises :class:`FlowFormatError` with a byte offset on malformed input."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FlowFormatError(f"{path}: truncated header, {len(raw)} bytes < 12 (byte offset {len(raw)})")
    magic, w, h = _HEADER.unpack_from(raw, 0)
    if magic != FLO_MAGIC:
        raise FlowFormatError(f"{path}: bad magic {magic!r} at byte offset 0 (expected {FLO_MAGIC})")
    if w <= 0 or h <= 0:
        raise FlowFormatError(f"{path}: non-positive dimensions {w}x{h} at byte offset 4")
    expected = 12 + 8 * w * h
    if len(raw) != expected:
        raise FlowFormatError(
            f"{path}: payload has {len(raw)} bytes, expected {expected} (truncation at byte offset {len(raw)})"
        )
    data = np.frombuffer(raw, dtype="<f4", count=2 * w * h, offset=12).reshape(h, w, 2)
    if not np.isfinite(data).all():
        bad = np.flatnonzero(~np.isfinite(data.reshape(-1)))
        raise FlowFormatError(f"{path}: non-finite value at byte offset {12 + int(bad[0]) * 4}")
    return FlowField(u=data[..., 0].copy(), v=data[..., 1].copy())


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized HSV -> RGB for h, s, v grids in [0, 1]."""
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - f * s)
    t = v * (1.0 - (1.0 - f) * s)
    channels = [
        np.choose(i, [v, q, p, p, t, v]),
        np.choose(i, [t, v, v, q, p, p]),
        np.choose(i, [p, p, t, v, v, q]),
    ]
    return np.stack(channels, axis=-1)


def flow_to_color(flow: FlowField, max_magnitude: float | None = None) -> np.ndarray:
    """Render ``flow`` on the optical-flow color wheel as a uint8 (H, W, 3) RGB image.

    Hue encodes direction, saturation encodes magnitude normalized by
    ``max_magnitude`` (default: the maximum observed magnitude). Zero flow
    maps to white; an all-zero field yields an all-white image.
    """
    if not flow.is_finite():
        raise FlowFormatError("cannot visualize a non-finite flow field")
    mag = flow.magnitude()
    if max_magnitude is None:
        max_magnitude = float(mag.max())
    angle = np.arctan2(flow.v.astype(np.float64), flow.u.astype(np.float64))
    hue = (angle / (2.0 * np.pi)) % 1.0
    sat = np.zeros_like(mag) if max_magnitude == 0 else np.clip(mag / max_magnitude, 0.0, 1.0)
    rgb = _hsv_to_rgb(hue, sat, np.ones_like(sat))
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)
