import numpy as np
import pytest
import torch

from framecast.data import FrameSequence, SequenceRecord
from framecast.synthetic import direction_class, generate_moving_shapes, random_scene_spec

# small tensors: single-threaded torch is both faster and bit-reproducible
torch.set_num_threads(1)


def make_records(
    n: int,
    seed: int = 0,
    canvas: tuple[int, int] = (64, 64),
    frames: int = 6,
    shapes: int = 2,
    global_motion: bool = True,
    velocity=None,
    with_flows: bool = True,
    split: str = "train",
) -> list[SequenceRecord]:
    """Render n synthetic sequences as in-memory records."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        spec = random_scene_spec(
            rng,
            canvas_size=canvas,
            num_frames=frames,
            num_shapes=shapes,
            velocity=velocity,
            global_motion=global_motion,
        )
        arr, flows = generate_moving_shapes(spec, seed=seed * 1000 + i)
        moving = spec.background_velocity != (0, 0)
        label = direction_class(spec.background_velocity) if global_motion and moving else None
        records.append(
            SequenceRecord(
                sequence=FrameSequence(frames=arr, source_id=f"synthetic-{i}"),
                flows=flows if with_flows else None,
                label=label,
                split=split,
                path=f"synthetic-{i}",
            )
        )
    return records


@pytest.fixture
def tiny_records():
    """Eight small 16x16 sequences for fast training-loop tests."""
    return make_records(8, seed=7, canvas=(16, 16), frames=5, shapes=1)
