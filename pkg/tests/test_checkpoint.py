"""Checkpoint format: bit-exact round trips and corruption handling."""

import json
import struct

import numpy as np
import pytest

from clda.checkpoint import (
    MAGIC, CheckpointError, deserialize_model, load_model, save_model,
    serialize_model,
)
from clda.model import ModelConfig, TransformerModel

CFG = ModelConfig(vocab_size=9, seq_len=4, width=6, mlp_width=8,
                  n_classes=3, depth=2)


@pytest.fixture
def model():
    m = TransformerModel.init(CFG, seed=42)
    # exercise non-trivial values everywhere
    m.head_b.data[:] = [0.5, -0.25, 1.0 / 3.0]
    return m


def test_round_trip_bitwise(model):
    blob = serialize_model(model)
    back = deserialize_model(blob)
    assert back.config == model.config
    for (na, ta), (nb, tb) in zip(model.named_params(), back.named_params()):
        assert na == nb
        assert ta.data.dtype == tb.data.dtype == np.float64
        assert np.array_equal(ta.data, tb.data)


def test_serialize_is_deterministic(model):
    assert serialize_model(model) == serialize_model(model)


def test_save_load_save_identical_bytes(model, tmp_path):
    p1 = tmp_path / "a.ckpt"
    p2 = tmp_path / "b.ckpt"
    save_model(p1, model)
    save_model(p2, load_model(p1))
    assert p1.read_bytes() == p2.read_bytes()


def test_loaded_params_untracked(model, tmp_path):
    model.set_requires_grad(True)
    path = tmp_path / "m.ckpt"
    save_model(path, model)
    loaded = load_model(path)
    assert not any(t.requires_grad for t in loaded.params())


def test_header_layout(model):
    blob = serialize_model(model)
    assert blob[:5] == MAGIC
    (hlen,) = struct.unpack_from("<I", blob, 5)
    header = json.loads(blob[9:9 + hlen].decode("utf-8"))
    assert header["meta"] == {"vocab_size": 9, "seq_len": 4, "width": 6,
                              "mlp_width": 8, "n_classes": 3, "depth": 2}
    names = [e["name"] for e in header["tensors"]]
    assert names[0] == "embed.tok"
    assert names[-1] == "head.b"
    offsets = [e["byte_offset"] for e in header["tensors"]]
    assert offsets == sorted(offsets)
    total = sum(int(np.prod(e["shape"])) for e in header["tensors"])
    assert len(blob) == 9 + hlen + 8 * total
    assert total == model.param_count()


def test_payload_is_little_endian_f8(model):
    blob = serialize_model(model)
    (hlen,) = struct.unpack_from("<I", blob, 5)
    payload = blob[9 + hlen:]
    first = np.frombuffer(payload, dtype="<f8",
                          count=model.tok_embed.size, offset=0)
    np.testing.assert_array_equal(first.reshape(model.tok_embed.shape),
                                  model.tok_embed.data)


def test_bad_magic(model):
    blob = bytearray(serialize_model(model))
    blob[0] ^= 0xFF
    with pytest.raises(CheckpointError, match="magic"):
        deserialize_model(bytes(blob))


def test_truncated_header_length(model):
    with pytest.raises(CheckpointError):
        deserialize_model(MAGIC + b"\x01")


def test_truncated_header(model):
    blob = serialize_model(model)
    with pytest.raises(CheckpointError):
        deserialize_model(blob[:40])


def test_truncated_payload(model):
    blob = serialize_model(model)
    with pytest.raises(CheckpointError, match="out of bounds"):
        deserialize_model(blob[:-8])


def test_header_not_json(model):
    hdr = b"not json at all!"
    blob = MAGIC + struct.pack("<I", len(hdr)) + hdr
    with pytest.raises(CheckpointError):
        deserialize_model(blob)


def test_missing_tensor(model):
    blob = serialize_model(model)
    (hlen,) = struct.unpack_from("<I", blob, 5)
    header = json.loads(blob[9:9 + hlen].decode("utf-8"))
    header["tensors"] = [e for e in header["tensors"] if e["name"] != "head.w"]
    hdr = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with pytest.raises(CheckpointError, match="head.w"):
        deserialize_model(MAGIC + struct.pack("<I", len(hdr)) + hdr + blob[9 + hlen:])


def test_bad_meta(model):
    blob = serialize_model(model)
    (hlen,) = struct.unpack_from("<I", blob, 5)
    header = json.loads(blob[9:9 + hlen].decode("utf-8"))
    header["meta"]["bogus_field"] = 1
    hdr = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with pytest.raises(CheckpointError):
        deserialize_model(MAGIC + struct.pack("<I", len(hdr)) + hdr + blob[9 + hlen:])


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "absent.ckpt")


def test_loaded_model_forward_matches(model, tmp_path):
    path = tmp_path / "m.ckpt"
    save_model(path, model)
    loaded = load_model(path)
    toks = np.random.default_rng(1).integers(0, CFG.vocab_size, (4, CFG.seq_len),
                                             dtype=np.int64)
    np.testing.assert_array_equal(model.forward(toks).data,
                                  loaded.forward(toks).data)


def test_exotic_float_values_survive(model, tmp_path):
    model.head_w.data[0, 0] = np.nextafter(0.0, 1.0)  # smallest subnormal
    model.head_w.data[0, 1] = -0.0
    model.head_w.data[1, 0] = 1e308
    path = tmp_path / "m.ckpt"
    save_model(path, model)
    got = load_model(path).head_w.data
    assert np.array_equal(got[0, 0], model.head_w.data[0, 0])
    assert np.signbit(got[0, 1])
    assert got[1, 0] == 1e308
