"""Versioned binary checkpoints.

Layout: magic ``CCT1``, a uint32 little-endian header length, a canonical
JSON header (model config, vocabulary, optional training metadata), a
uint32 tensor count, then name-sorted tensors. Each tensor is stored as
uint16 name length + UTF-8 name, uint8 rank, uint32 dims, and raw float64
little-endian data in C order. Loading and re-saving reproduces the file
byte for byte.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import DataError
from .model import CctModel, ModelConfig
from .vocab import Vocabulary

__all__ = ["MAGIC", "save_checkpoint", "load_checkpoint"]

MAGIC = b"CCT1"
_FORMAT_VERSION = 1


def _canonical_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode(
        "utf-8"
    )


def _write_tensor(out: list[bytes], name: str, array: np.ndarray) -> None:
    data = np.ascontiguousarray(array, dtype="<f8")
    name_bytes = name.encode("utf-8")
    out.append(struct.pack("<H", len(name_bytes)))
    out.append(name_bytes)
    out.append(struct.pack("<B", data.ndim))
    for dim in data.shape:
        out.append(struct.pack("<I", dim))
    out.append(data.tobytes(order="C"))


def save_checkpoint(
    path: str | Path,
    model: CctModel,
    training_meta: dict | None = None,
    extra_tensors: dict[str, np.ndarray] | None = None,
) -> None:
    header = {
        "version": _FORMAT_VERSION,
        "model": asdict(model.config),
        "vocab": model.vocab.lexemes,
        "training": training_meta or {},
    }
    header_bytes = _canonical_header(header)
    tensors = dict(model.params)
    for name, array in (extra_tensors or {}).items():
        tensors["extra." + name] = array
    chunks: list[bytes] = [MAGIC, struct.pack("<I", len(header_bytes)), header_bytes]
    chunks.append(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        _write_tensor(chunks, name, tensors[name])
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> tuple[CctModel, dict, dict[str, np.ndarray]]:
    """Returns (model, training_meta, extra_tensors)."""
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise DataError(f"{path}: not a checkpoint (bad magic bytes)")
    offset = 4
    (header_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    header = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    if header.get("version") != _FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {header.get('version')}")
    (count,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", blob, offset)
        offset += 1
        shape = []
        for _ in range(ndim):
            (dim,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            shape.append(dim)
        size = int(np.prod(shape)) if shape else 1
        array = np.frombuffer(blob, dtype="<f8", count=size, offset=offset).reshape(shape)
        tensors[name] = array.astype(np.float64).copy()
        offset += size * 8
    if offset != len(blob):
        raise DataError(f"{path}: trailing bytes in checkpoint")

    params = {k: v for k, v in tensors.items() if not k.startswith("extra.")}
    extra = {k[len("extra.") :]: v for k, v in tensors.items() if k.startswith("extra.")}
    config = ModelConfig(**header["model"])
    vocab = Vocabulary(header["vocab"])
    model = CctModel(config=config, params=params, vocab=vocab)
    return model, header.get("training", {}), extra
