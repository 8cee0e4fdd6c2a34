"""Binary checkpoint format for model parameters.

Layout:

    bytes 0..4    magic ``CLDA1``
    bytes 5..8    header length, uint32 little-endian
    header        UTF-8 JSON: {"meta": model config, "tensors": [
                      {"name", "shape", "byte_offset"}, ...]}
    payload       each tensor as raw little-endian float64, row-major,
                  at its byte_offset relative to the payload start

The header JSON is serialized canonically (sorted keys, no whitespace) and
tensors are written in the model's fixed parameter order, so
save -> load -> save reproduces the file byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from .model import ModelConfig, TransformerModel, EncoderBlock, block_param_layout
from .tensor_core import Tensor

MAGIC = b"CLDA1"


class CheckpointError(ValueError):
    """Malformed checkpoint bytes."""


def serialize_model(model: TransformerModel) -> bytes:
    entries = []
    payload = bytearray()
    for name, t in model.named_params():
        entries.append({
            "name": name,
            "shape": list(t.shape),
            "byte_offset": len(payload),
        })
        payload += np.ascontiguousarray(t.data, dtype="<f8").tobytes()
    header = {
        "meta": dataclasses.asdict(model.config),
        "tensors": entries,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<I", len(header_bytes)) + header_bytes + bytes(payload)


def deserialize_model(data: bytes) -> TransformerModel:
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"bad magic: expected {MAGIC!r}, got {data[:len(MAGIC)]!r}")
    pos = len(MAGIC)
    if len(data) < pos + 4:
        raise CheckpointError("truncated header length field")
    (header_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    if len(data) < pos + header_len:
        raise CheckpointError("truncated header")
    try:
        header = json.loads(data[pos:pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}") from None
    payload = data[pos + header_len:]

    try:
        config = ModelConfig(**header["meta"])
        entries = header["tensors"]
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed header: {exc}") from None

    arrays: dict[str, np.ndarray] = {}
    for entry in entries:
        name = entry["name"]
        shape = tuple(int(s) for s in entry["shape"])
        offset = int(entry["byte_offset"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = offset + 8 * count
        if end > len(payload):
            raise CheckpointError(f"tensor {name}: payload out of bounds")
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        arrays[name] = arr.astype(np.float64).reshape(shape)
    return _build_model(config, arrays)


def _build_model(config: ModelConfig, arrays: dict[str, np.ndarray]) -> TransformerModel:
    def take(name: str) -> Tensor:
        try:
            return Tensor(arrays[name])
        except KeyError:
            raise CheckpointError(f"checkpoint is missing tensor {name}") from None

    blocks = []
    for i in range(config.depth):
        params = {dotted: take(f"blocks.{i}.{dotted}")
                  for dotted, _ in block_param_layout(config)}
        blocks.append(EncoderBlock(config, params))
    return TransformerModel(config, take("embed.tok"), take("embed.pos"),
                            blocks, take("head.w"), take("head.b"))


def save_model(path, model: TransformerModel) -> None:
    Path(path).write_bytes(serialize_model(model))


def load_model(path) -> TransformerModel:
    """Load a checkpoint; parameters come back untracked (requires_grad off)."""
    return deserialize_model(Path(path).read_bytes())
