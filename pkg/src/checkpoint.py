"""
Head checkpoints: ``HDP1`` magic, uint32 LE header length, JSON header, then every
tensor as float64 little-endian in declaration order.
"""

import json
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.errors import CheckpointError
from src.head import HeadParams, HiddenLayer, MLPParams, ProbeParams

MAGIC = b"HDP1"
HEADER_KEYS = ("mode", "input_dim", "dropout", "n_hidden_layers", "tensors")


def save_checkpoint(path: Path, params: HeadParams, seed: int, extra: Optional[Dict[str, Any]] = None) -> Path:
    tensors = params.named_tensors()
    header = {
        "mode": params.mode.value,
        "input_dim": params.input_dim,
        "dropout": params.mlp.dropout,
        "n_hidden_layers": len(params.mlp.hidden),
        "seed": seed,
        "tensors": [[name, list(tensor.shape)] for name, tensor in tensors.items()],
    }
    if extra:
        header["extra"] = extra
    encoded = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(encoded)))
        f.write(encoded)
        for tensor in tensors.values():
            f.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())
    return path


def load_checkpoint(path: Path) -> Tuple[HeadParams, Dict[str, Any]]:
    """
    Read a checkpoint written by ``save_checkpoint``.

    Returns:
        (parameters, header dictionary)
    """
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a head checkpoint")
    if len(data) < 8:
        raise CheckpointError(f"{path}: truncated header")
    (length,) = struct.unpack_from("<I", data, 4)
    try:
        header = json.loads(data[8 : 8 + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: unreadable header ({e})") from e
    if not isinstance(header, dict):
        raise CheckpointError(f"{path}: header is not a JSON object")
    missing = [key for key in HEADER_KEYS if key not in header]
    if missing:
        raise CheckpointError(f"{path}: header lacks {', '.join(missing)}")
    if not isinstance(header["tensors"], list):
        raise CheckpointError(f"{path}: header tensors must be a list")

    offset = 8 + length
    tensors: Dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        try:
            name, shape = str(entry[0]), [int(n) for n in entry[1]]
        except (TypeError, ValueError, IndexError) as e:
            raise CheckpointError(f"{path}: bad tensor entry {entry!r}") from e
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(data):
            raise CheckpointError(f"{path}: payload ends inside tensor {name}")
        tensors[name] = np.frombuffer(data[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes")

    try:
        return _assemble(tensors, header), header
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: inconsistent header ({e})") from e


def _assemble(tensors: Dict[str, np.ndarray], header: Dict[str, Any]) -> HeadParams:
    probe = None
    if "probe.Q" in tensors:
        probe = ProbeParams(Q=tensors["probe.Q"], W=tensors["probe.W"])
    hidden = tuple(
        HiddenLayer(
            weight=tensors[f"mlp.{i}.weight"],
            bias=tensors[f"mlp.{i}.bias"],
            ln_gain=tensors[f"mlp.{i}.ln_gain"],
            ln_bias=tensors[f"mlp.{i}.ln_bias"],
        )
        for i in range(int(header["n_hidden_layers"]))
    )
    mlp = MLPParams(
        hidden=hidden,
        out_weight=tensors["out.weight"],
        out_bias=tensors["out.bias"],
        dropout=float(header["dropout"]),
    )
    return HeadParams(probe=probe, mlp=mlp)
