"""Synthetic moving-shape scenes with analytic ground-truth flow.

Scenes are rendered at integer pixel positions with integer per-frame
velocities, which keeps the emitted ground truth exact: warping frame ``t``
by the ground-truth flow reproduces frame ``t+1`` to floating-point
precision. Flow is emitted in the sampling-offset convention shared with
:mod:`framecast.flo` (the warped frame samples the source at ``x + F(x)``),
so a region moving with velocity ``(vx, vy)`` carries offset ``(-vx, -vy)``
on the union of its source and target footprints; the union covers the
vacated band, whose pixels must sample background.

v1 restrictions (validated before rendering): shapes stay at least one
pixel inside the canvas in every frame, the consecutive-footprint unions of
distinct shapes never overlap, and a moving background must be a constant
color (content entering at the border must match border replication).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import SceneSpecError
from .flo import FlowField

Color = tuple[float, float, float]

DIRECTION_CLASSES = 8  # motion labels: 45-degree sectors, 0 = rightward


@dataclass
class ShapeSpec:
    """One moving shape: axis-aligned bounding box, rigid integer motion."""

    kind: str  # "rectangle" or "ellipse"
    size: tuple[int, int]  # (height, width) of the bounding box, pixels
    velocity: tuple[int, int]  # (vx, vy) pixels/frame; +x right, +y down
    start: tuple[int, int]  # (x0, y0) top-left corner in frame 0
    color: Color | None = None  # normalized RGB in [-1, 1]; None -> drawn from seed


@dataclass
class SyntheticSceneSpec:
    canvas_size: tuple[int, int]  # (H, W)
    shapes: list[ShapeSpec]
    num_frames: int
    background: Color | int = (0.0, 0.0, 0.0)  # RGB, or an int texture seed
    background_velocity: tuple[int, int] = (0, 0)  # (vx, vy); nonzero needs a constant color

    def frame_count(self) -> int:
        return self.num_frames


def _shape_mask(shape: ShapeSpec) -> np.ndarray:
    h, w = shape.size
    if shape.kind == "rectangle":
        return np.ones((h, w), dtype=bool)
    if shape.kind == "ellipse":
        yy, xx = np.mgrid[0:h, 0:w]
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        ry, rx = h / 2.0, w / 2.0
        return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    raise SceneSpecError(f"unknown shape kind {shape.kind!r}")


def shape_position(shape: ShapeSpec, t: int) -> tuple[int, int]:
    """Top-left (x, y) of the shape's bounding box in frame ``t``."""
    return (shape.start[0] + t * shape.velocity[0], shape.start[1] + t * shape.velocity[1])


def shape_footprint(shape: ShapeSpec, t: int, canvas_size: tuple[int, int]) -> np.ndarray:
    """Boolean (H, W) mask of the pixels the shape covers in frame ``t``."""
    H, W = canvas_size
    mask = np.zeros((H, W), dtype=bool)
    x0, y0 = shape_position(shape, t)
    h, w = shape.size
    mask[y0 : y0 + h, x0 : x0 + w] = _shape_mask(shape)
    return mask


def validate_scene_spec(spec: SyntheticSceneSpec) -> None:
    """Raise :class:`SceneSpecError` on any v1 invariant violation."""
    H, W = spec.canvas_size
    if H % 8 or W % 8:
        raise SceneSpecError(f"canvas {H}x{W} must be a multiple of 8 in both dimensions")
    if spec.num_frames < 2:
        raise SceneSpecError("a scene needs at least 2 frames")
    for vel_name, vel in [("background_velocity", spec.background_velocity)] + [
        (f"shape {i} velocity", s.velocity) for i, s in enumerate(spec.shapes)
    ]:
        if not all(isinstance(c, (int, np.integer)) for c in vel):
            raise SceneSpecError(f"{vel_name} must be integer pixels/frame, got {vel}")
    if spec.background_velocity != (0, 0) and isinstance(spec.background, int):
        raise SceneSpecError("a moving background must be a constant color, not a texture")
    for i, shape in enumerate(spec.shapes):
        h, w = shape.size
        if h < 1 or w < 1:
            raise SceneSpecError(f"shape {i} has empty size {shape.size}")
        for t in range(spec.num_frames):
            x0, y0 = shape_position(shape, t)
            if x0 < 1 or y0 < 1 or x0 + w > W - 1 or y0 + h > H - 1:
                raise SceneSpecError(
                    f"shape {i} leaves the 1-pixel canvas margin at frame {t} "
                    f"(bbox ({x0},{y0})+({w}x{h}) on {W}x{H})"
                )
    # Single-valued flow needs the consecutive-footprint unions disjoint.
    for t in range(spec.num_frames - 1):
        unions = [
            shape_footprint(s, t, spec.canvas_size) | shape_footprint(s, t + 1, spec.canvas_size)
            for s in spec.shapes
        ]
        for i in range(len(unions)):
            for j in range(i + 1, len(unions)):
                if (unions[i] & unions[j]).any():
                    raise SceneSpecError(
                        f"shapes {i} and {j} overlap between frames {t} and {t + 1}"
                    )


def _background(spec: SyntheticSceneSpec, rng: np.random.Generator) -> np.ndarray:
    H, W = spec.canvas_size
    if isinstance(spec.background, int):
        texture_rng = np.random.default_rng(spec.background)
        blocks = texture_rng.uniform(-0.6, 0.6, size=(3, H // 8, W // 8))
        return np.kron(blocks, np.ones((1, 8, 8))).astype(np.float32)
    color = np.asarray(spec.background, dtype=np.float32)
    return np.broadcast_to(color[:, None, None], (3, H, W)).copy()


def generate_moving_shapes(spec: SyntheticSceneSpec, seed: int = 0):
    """Render a scene; returns ``(frames, flows)``.

    ``frames`` is a float32 (T, 3, H, W) array in [-1, 1]; ``flows`` is a
    list of T-1 :class:`FlowField`, where ``flows[t]`` carries frame ``t``
    content to frame ``t+1``. Identical ``(spec, seed)`` pairs produce
    bit-identical output; ``seed`` only fills in unspecified shape colors.
    """
    validate_scene_spec(spec)
    H, W = spec.canvas_size
    rng = np.random.default_rng(seed)
    colors = []
    for shape in spec.shapes:
        if shape.color is None:
            colors.append(tuple(rng.uniform(-0.6, 0.6, size=3)))
        else:
            colors.append(shape.color)

    background = _background(spec, rng)
    frames = np.empty((spec.num_frames, 3, H, W), dtype=np.float32)
    footprints = []  # per frame, per shape
    for t in range(spec.num_frames):
        frame = background.copy()
        masks = []
        for shape, color in zip(spec.shapes, colors):
            mask = shape_footprint(shape, t, spec.canvas_size)
            frame[:, mask] = np.asarray(color, dtype=np.float32)[:, None]
            masks.append(mask)
        frames[t] = frame
        footprints.append(masks)

    bg_vx, bg_vy = spec.background_velocity
    flows = []
    for t in range(spec.num_frames - 1):
        u = np.full((H, W), -float(bg_vx), dtype=np.float32)
        v = np.full((H, W), -float(bg_vy), dtype=np.float32)
        for k, shape in enumerate(spec.shapes):
            region = footprints[t][k] | footprints[t + 1][k]
            u[region] = -float(shape.velocity[0])
            v[region] = -float(shape.velocity[1])
        flows.append(FlowField(u=u, v=v))
    return frames, flows


def direction_class(velocity: tuple[int, int]) -> int:
    """8-way motion label from a velocity's angle (sector 0 centered on +x)."""
    vx, vy = velocity
    if vx == 0 and vy == 0:
        raise SceneSpecError("zero velocity has no direction class")
    angle = np.arctan2(float(vy), float(vx))
    return int(np.round(angle / (np.pi / 4.0))) % DIRECTION_CLASSES


_DIRECTIONS = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)]

COMPASS_DIRECTIONS = tuple(_DIRECTIONS)


@dataclass
class SceneTemplate:
    """A velocity-free appearance template: shapes, colors, background.

    Realizing the template with different velocities yields scenes that
    differ only in their motion, which isolates motion as the factor of
    variation (the controlled setting the motion-representation checks
    need). Canonical start positions are drawn so that every compass
    direction at the template's travel budget stays inside the canvas.
    """

    canvas_size: tuple[int, int]
    shapes: list[ShapeSpec]  # velocity (0, 0); starts are the canonical layout
    background: Color
    max_travel: int

    def start_bounds(self, size: tuple[int, int]) -> tuple[int, int, int, int]:
        H, W = self.canvas_size
        h, w = size
        return (
            1 + self.max_travel,
            W - 1 - w - self.max_travel,
            1 + self.max_travel,
            H - 1 - h - self.max_travel,
        )


def draw_scene_template(
    rng: np.random.Generator,
    canvas_size: tuple[int, int] = (64, 64),
    num_shapes: int = 3,
    max_travel: int = 14,
    size_range: tuple[int, int] = (7, 10),
    max_tries: int = 800,
) -> SceneTemplate:
    """Draw a template whose layout is valid for every compass direction."""
    for _ in range(max_tries):
        template = SceneTemplate(
            canvas_size=canvas_size, shapes=[], background=(0.0, 0.0, 0.0), max_travel=max_travel
        )
        ok = True
        for _ in range(num_shapes):
            size = (
                int(rng.integers(size_range[0], size_range[1] + 1)),
                int(rng.integers(size_range[0], size_range[1] + 1)),
            )
            x_lo, x_hi, y_lo, y_hi = template.start_bounds(size)
            if x_hi <= x_lo or y_hi <= y_lo:
                ok = False
                break
            template.shapes.append(
                ShapeSpec(
                    kind="rectangle" if rng.random() < 0.5 else "ellipse",
                    size=size,
                    velocity=(0, 0),
                    start=(int(rng.integers(x_lo, x_hi)), int(rng.integers(y_lo, y_hi))),
                    color=tuple(rng.uniform(-0.6, 0.6, 3)),
                )
            )
        if not ok:
            continue
        template.background = tuple(rng.uniform(-0.3, 0.3, 3))
        try:
            for direction in COMPASS_DIRECTIONS:
                speed = max(1, max_travel // 7)
                validate_scene_spec(realize_template(template, (direction[0] * speed, direction[1] * speed), 8))
        except SceneSpecError:
            continue
        return template
    raise SceneSpecError(f"could not draw a valid {num_shapes}-shape template in {max_tries} tries")


def realize_template(
    template: SceneTemplate,
    velocity: tuple[int, int],
    num_frames: int,
    starts: Sequence[tuple[int, int]] | None = None,
) -> SyntheticSceneSpec:
    """A globally translating scene from the template; optional start override."""
    starts = starts or [s.start for s in template.shapes]
    return SyntheticSceneSpec(
        canvas_size=template.canvas_size,
        shapes=[
            ShapeSpec(kind=s.kind, size=s.size, velocity=velocity, start=tuple(start), color=s.color)
            for s, start in zip(template.shapes, starts)
        ],
        num_frames=num_frames,
        background=template.background,
        background_velocity=velocity,
    )


def jittered_template_spec(
    template: SceneTemplate,
    rng: np.random.Generator,
    velocity: tuple[int, int],
    num_frames: int,
    max_tries: int = 200,
) -> SyntheticSceneSpec:
    """The template's appearance at fresh start positions (held-out instances)."""
    for _ in range(max_tries):
        starts = []
        for shape in template.shapes:
            x_lo, x_hi, y_lo, y_hi = template.start_bounds(shape.size)
            starts.append((int(rng.integers(x_lo, x_hi)), int(rng.integers(y_lo, y_hi))))
        spec = realize_template(template, velocity, num_frames, starts=starts)
        try:
            validate_scene_spec(spec)
        except SceneSpecError:
            continue
        return spec
    raise SceneSpecError(f"could not jitter the template in {max_tries} tries")


def random_scene_spec(
    rng: np.random.Generator,
    canvas_size: tuple[int, int] = (64, 64),
    num_frames: int = 6,
    num_shapes: int = 2,
    velocity: tuple[int, int] | None = None,
    speed: int = 2,
    global_motion: bool = True,
    max_tries: int = 200,
) -> SyntheticSceneSpec:
    """Draw a valid random scene spec.

    With ``global_motion`` every shape and the background share one velocity
    (a rigidly translating scene, uniform ground-truth flow); otherwise
    shapes move independently over a static background. ``velocity`` pins
    the scene velocity; by default one of the 8 compass directions scaled
    by ``speed`` is drawn.
    """
    H, W = canvas_size
    size_lo = max(3, min(H, W) // 8)
    size_hi = max(size_lo + 1, min(H, W) // 4)
    for _ in range(max_tries):
        if velocity is None:
            dx, dy = _DIRECTIONS[int(rng.integers(0, len(_DIRECTIONS)))]
            vel = (dx * speed, dy * speed)
        else:
            vel = (int(velocity[0]), int(velocity[1]))
        shapes = []
        for _ in range(num_shapes):
            shape_vel = vel if global_motion else (
                _DIRECTIONS[int(rng.integers(0, len(_DIRECTIONS)))][0] * speed,
                _DIRECTIONS[int(rng.integers(0, len(_DIRECTIONS)))][1] * speed,
            )
            size = (int(rng.integers(size_lo, size_hi + 1)), int(rng.integers(size_lo, size_hi + 1)))
            travel_x = shape_vel[0] * (num_frames - 1)
            travel_y = shape_vel[1] * (num_frames - 1)
            x_lo, x_hi = 1 + max(0, -travel_x), W - 1 - size[1] - max(0, travel_x)
            y_lo, y_hi = 1 + max(0, -travel_y), H - 1 - size[0] - max(0, travel_y)
            if x_hi <= x_lo or y_hi <= y_lo:
                break
            start = (int(rng.integers(x_lo, x_hi)), int(rng.integers(y_lo, y_hi)))
            kind = "rectangle" if rng.random() < 0.5 else "ellipse"
            color = tuple(rng.uniform(-0.6, 0.6, size=3))
            shapes.append(ShapeSpec(kind=kind, size=size, velocity=shape_vel, start=start, color=color))
        if len(shapes) != num_shapes:
            continue
        spec = SyntheticSceneSpec(
            canvas_size=canvas_size,
            shapes=shapes,
            num_frames=num_frames,
            background=tuple(rng.uniform(-0.3, 0.3, size=3)),
            background_velocity=vel if global_motion else (0, 0),
        )
        try:
            validate_scene_spec(spec)
        except SceneSpecError:
            continue
        return spec
    raise SceneSpecError(
        f"could not place {num_shapes} disjoint shapes on {W}x{H} in {max_tries} tries"
    )
