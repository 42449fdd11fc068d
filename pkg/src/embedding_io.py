"""
Binary embedding files: ``EMB1`` magic, uint32 LE P and D, then P·D float32 LE values (patch-major).
"""

import struct
from pathlib import Path
from typing import Iterable, List, Optional, Tuple

import numpy as np

from src.errors import EmbeddingFormatError
from src.records import SYNTHETIC_NEGATIVE_SUFFIX, EmbeddingClip, format_seconds

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")


def embedding_path(root: Path, video_id: str, clip_end_t: float) -> Path:
    """
    Embeddings live at ``<root>/<video_id>/<clip_end_t>.emb``.

    Synthetic negatives are prefixes of their source video and share its files.
    """
    source = video_id[: -len(SYNTHETIC_NEGATIVE_SUFFIX)] if video_id.endswith(SYNTHETIC_NEGATIVE_SUFFIX) else video_id
    return Path(root) / source / f"{format_seconds(clip_end_t)}.emb"


def read_patches(path: Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise EmbeddingFormatError(f"{path}: file shorter than header")
    magic, n_patches, dim = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{path}: bad magic {magic!r}")
    if n_patches < 1 or dim < 1:
        raise EmbeddingFormatError(f"{path}: empty shape P={n_patches}, D={dim}")
    payload = data[_HEADER.size :]
    expected = n_patches * dim * 4
    if len(payload) != expected:
        kind = "truncated" if len(payload) < expected else "oversized"
        raise EmbeddingFormatError(
            f"{path}: {kind} payload, expected {n_patches}x{dim} values ({expected} bytes), got {len(payload)} bytes"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(n_patches, dim)
    if not np.all(np.isfinite(values)):
        raise EmbeddingFormatError(f"{path}: non-finite values in payload")
    return values.astype(np.float64)


def load_embedding(
    path: Path,
    video_id: Optional[str] = None,
    clip_end_t: Optional[float] = None,
    label: int = 0,
) -> EmbeddingClip:
    """
    Load one clip embedding.

    Args:
        path: Path to an ``.emb`` file
        video_id: Defaults to the parent directory name
        clip_end_t: Defaults to the file stem parsed as seconds
        label: Binary label to attach

    Returns:
        EmbeddingClip with 64-bit patches
    """
    path = Path(path)
    patches = read_patches(path)
    if video_id is None:
        video_id = path.parent.name
    if clip_end_t is None:
        try:
            clip_end_t = float(path.stem)
        except ValueError as e:
            raise EmbeddingFormatError(f"{path}: cannot infer clip end time from file name") from e
    return EmbeddingClip(video_id=video_id, clip_end_t=clip_end_t, patches=patches, label=label)


def write_embedding(path: Path, patches: np.ndarray) -> Path:
    patches = np.asarray(patches)
    if patches.ndim != 2:
        raise EmbeddingFormatError(f"{path}: patches must be 2-D, got shape {patches.shape}")
    if not np.all(np.isfinite(patches)):
        raise EmbeddingFormatError(f"{path}: refusing to write non-finite values")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n_patches, dim = patches.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, n_patches, dim))
        f.write(np.ascontiguousarray(patches, dtype="<f4").tobytes())
    return path


def load_clips(entries: Iterable[Tuple[str, float, int]], root: Path) -> List[EmbeddingClip]:
    """Load every clip of a clip index from ``root``, labelled as the index says."""
    return [
        load_embedding(embedding_path(root, video_id, clip_end_t), video_id, clip_end_t, label)
        for video_id, clip_end_t, label in entries
    ]
