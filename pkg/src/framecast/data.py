"""Frame-sequence ingestion, normalization, and dataset manifests.

Frames are stored channel-first float32 in [-1, 1]. A dataset directory
holds one subdirectory per sequence (``frame_0000.png`` ... plus optional
``flow_0000.flo`` ... ground truth) and a plain-text ``manifest.txt``:

    # framecast dataset manifest
    version=1
    normalization=uint8[0,255]<->[-1,1]
    entry<TAB>relative/sequence/dir<TAB>split<TAB>label

``label`` is a motion-class integer or ``-`` when absent. Split tags
partition the entries into train/val/test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DatasetError, IngestionError
from .flo import FlowField, read_flo, write_flo
from .validation import check_spatial_size

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}
MANIFEST_NAME = "manifest.txt"
NORMALIZATION_TAG = "uint8[0,255]<->[-1,1]"


@dataclass
class FrameSequence:
    """Ordered stack of RGB frames, float32 (T, 3, H, W) in [-1, 1]."""

    frames: np.ndarray
    frame_interval: float = 1.0
    source_id: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 4 or self.frames.shape[1] != 3:
            raise DatasetError(
                f"frames must be (T, 3, H, W), got {self.frames.shape} ({self.source_id or 'unnamed'})"
            )
        if self.frames.shape[0] < 2:
            raise DatasetError(f"need at least 2 frames, got {self.frames.shape[0]}")
        check_spatial_size(self.frames.shape[2], self.frames.shape[3])

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def spatial_size(self) -> tuple[int, int]:
        return self.frames.shape[2], self.frames.shape[3]


def normalize_frame(raw: np.ndarray) -> np.ndarray:
    """Affine map of an 8-bit image [0, 255] onto [-1, 1] (float32)."""
    return np.asarray(raw, dtype=np.float32) / 127.5 - 1.0


def denormalize_frame(frame: np.ndarray) -> tuple[np.ndarray, bool]:
    """Inverse of :func:`normalize_frame`.

    Returns ``(uint8_image, clamped)`` where ``clamped`` flags inputs that
    fell outside [-1, 1] and were clipped. Round-trips all 256 8-bit values
    losslessly.
    """
    arr = np.asarray(frame, dtype=np.float64)
    clamped = bool((arr < -1.0).any() or (arr > 1.0).any())
    out = np.clip(np.rint((arr + 1.0) * 127.5), 0, 255).astype(np.uint8)
    return out, clamped


def _read_image(path: Path, target_size: tuple[int, int] | None) -> np.ndarray:
    try:
        with Image.open(path) as img:
            img = img.convert("RGB")
            if target_size is not None:
                h, w = target_size
                img = img.resize((w, h), Image.BILINEAR)
            raw = np.asarray(img, dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise IngestionError(f"cannot read frame image {path}: {exc}") from exc
    return normalize_frame(raw).transpose(2, 0, 1)


def load_frame_folder(path, target_size: tuple[int, int] | None = None) -> FrameSequence:
    """Load a folder of images (lexicographic frame order) as a sequence."""
    folder = Path(path)
    if not folder.is_dir():
        raise DatasetError(f"{folder} is not a directory")
    files = sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if len(files) < 2:
        raise DatasetError(f"{folder} holds {len(files)} frame images; need at least 2")
    frames = np.stack([_read_image(p, target_size) for p in files], axis=0)
    return FrameSequence(frames=frames, source_id=str(folder))


def save_frame_folder(frames: np.ndarray, folder) -> list[Path]:
    """Write normalized frames as frame_%04d.png; returns the paths."""
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in range(frames.shape[0]):
        img8, _ = denormalize_frame(frames[t])
        path = folder / f"frame_{t:04d}.png"
        Image.fromarray(img8.transpose(1, 2, 0)).save(path)
        paths.append(path)
    return paths


def save_flow_files(flows: list[FlowField], folder) -> list[Path]:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    paths = []
    for t, flow in enumerate(flows):
        path = folder / f"flow_{t:04d}.flo"
        write_flo(flow, path)
        paths.append(path)
    return paths


@dataclass
class ManifestEntry:
    path: str  # sequence directory, relative to the manifest
    split: str  # train | val | test
    label: int | None = None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    normalization: str = NORMALIZATION_TAG
    root: Path | None = None  # directory the entry paths are relative to

    def split(self, tag: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == tag]


def write_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    lines = ["# framecast dataset manifest", "version=1", f"normalization={manifest.normalization}"]
    for e in manifest.entries:
        label = "-" if e.label is None else str(e.label)
        lines.append(f"entry\t{e.path}\t{e.split}\t{label}")
    path.write_text("\n".join(lines) + "\n")


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"manifest {path} does not exist")
    manifest = DatasetManifest(root=path.parent)
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line and not line.startswith("entry"):
            key, value = line.split("=", 1)
            if key == "normalization":
                manifest.normalization = value
            continue
        parts = line.split("\t")
        if parts[0] != "entry" or len(parts) != 4:
            raise DatasetError(f"{path}:{lineno}: malformed manifest line {line!r}")
        _, rel, split, label = parts
        if split not in ("train", "val", "test"):
            raise DatasetError(f"{path}:{lineno}: unknown split tag {split!r}")
        manifest.entries.append(
            ManifestEntry(path=rel, split=split, label=None if label == "-" else int(label))
        )
    if not manifest.entries:
        raise DatasetError(f"manifest {path} lists no entries")
    return manifest


@dataclass
class SequenceRecord:
    """One resolved dataset entry: frames plus optional flows and label."""

    sequence: FrameSequence
    flows: list[FlowField] | None
    label: int | None
    split: str
    path: str


def load_entry(manifest: DatasetManifest, entry: ManifestEntry) -> SequenceRecord:
    if manifest.root is None:
        raise DatasetError("manifest has no root directory; read it from disk first")
    seq_dir = manifest.root / entry.path
    sequence = load_frame_folder(seq_dir)
    flow_files = sorted(seq_dir.glob("flow_*.flo"))
    flows = None
    if flow_files:
        if len(flow_files) != len(sequence) - 1:
            raise DatasetError(
                f"{seq_dir}: {len(flow_files)} flow files for {len(sequence)} frames "
                f"(expected {len(sequence) - 1})"
            )
        flows = [read_flo(p) for p in flow_files]
        for flow in flows:
            if flow.shape != sequence.spatial_size:
                raise DatasetError(f"{seq_dir}: flow size {flow.shape} != frame size {sequence.spatial_size}")
    return SequenceRecord(sequence=sequence, flows=flows, label=entry.label, split=entry.split, path=entry.path)


def load_split(manifest: DatasetManifest, tag: str) -> list[SequenceRecord]:
    entries = manifest.split(tag)
    if not entries:
        raise DatasetError(f"manifest has no '{tag}' entries")
    return [load_entry(manifest, e) for e in entries]
