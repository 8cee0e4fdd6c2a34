"""Tiny pre-norm transformer encoder classifiers.

Each block is single-head self-attention plus a two-layer GELU MLP, each
behind its own layer norm, with residual adds. Because the blocks are
pre-norm, zeroing every parameter of a block (layer norm gains included)
turns it into an exact identity, which is what layer ablation relies on.

During a forward with ``capture_maps=True`` every block caches its
attention module output (after the output projection, before the residual
add, shape [batch, tokens, width]) and the analogous MLP module output;
those maps feed the layer-mapping and representation-similarity analyses.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .tensor_core import (
    Tensor, ShapeError, add, gelu, layer_norm, matmul, reshape, scale,
    softmax, transpose,
)


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int = 32
    seq_len: int = 16
    width: int = 32
    mlp_width: int = 64
    n_classes: int = 4
    depth: int = 8

    def validate(self) -> None:
        for field in dataclasses.fields(self):
            v = getattr(self, field.name)
            if not isinstance(v, int) or v <= 0:
                raise ValueError(f"ModelConfig.{field.name} must be a positive int, got {v!r}")


# Per-block parameter layout. The order is the contract for flat read/write
# and for serialization: attention, MLP, then the two norms.
def block_param_layout(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    c, m = config.width, config.mlp_width
    return [
        ("attn.wq", (c, c)), ("attn.bq", (c,)),
        ("attn.wk", (c, c)), ("attn.bk", (c,)),
        ("attn.wv", (c, c)), ("attn.bv", (c,)),
        ("attn.wo", (c, c)), ("attn.bo", (c,)),
        ("mlp.w1", (c, m)), ("mlp.b1", (m,)),
        ("mlp.w2", (m, c)), ("mlp.b2", (c,)),
        ("norm1.gain", (c,)), ("norm1.bias", (c,)),
        ("norm2.gain", (c,)), ("norm2.bias", (c,)),
    ]


def _field_name(dotted: str) -> str:
    return dotted.replace(".", "_")


_INIT_STD = 0.02


class EncoderBlock:
    """One pre-norm block; holds its parameters and last captured maps."""

    def __init__(self, config: ModelConfig, params: dict[str, Tensor]):
        self.config = config
        for dotted, shape in block_param_layout(config):
            t = params[dotted]
            if t.shape != shape:
                raise ShapeError(f"block param {dotted}: expected {shape}, got {t.shape}")
            setattr(self, _field_name(dotted), t)
        self.last_attn_map: Tensor | None = None
        self.last_mlp_map: Tensor | None = None

    @classmethod
    def init(cls, config: ModelConfig, rng: np.random.Generator) -> "EncoderBlock":
        params: dict[str, Tensor] = {}
        for dotted, shape in block_param_layout(config):
            if dotted.endswith(".gain"):
                params[dotted] = Tensor(np.ones(shape))
            elif len(shape) == 1:
                params[dotted] = Tensor(np.zeros(shape))
            else:
                params[dotted] = Tensor(rng.normal(0.0, _INIT_STD, shape))
        return cls(config, params)

    def named_params(self) -> Iterator[tuple[str, Tensor]]:
        for dotted, _ in block_param_layout(self.config):
            yield dotted, getattr(self, _field_name(dotted))

    def forward(self, x: Tensor, capture_maps: bool = False) -> Tensor:
        xn = layer_norm(x, self.norm1_gain, self.norm1_bias)
        q = add(matmul(xn, self.attn_wq), self.attn_bq)
        k = add(matmul(xn, self.attn_wk), self.attn_bk)
        v = add(matmul(xn, self.attn_wv), self.attn_bv)
        scores = scale(matmul(q, transpose(k, (0, 2, 1))),
                       1.0 / np.sqrt(self.config.width))
        ctx = matmul(softmax(scores), v)
        attn_out = add(matmul(ctx, self.attn_wo), self.attn_bo)
        if capture_maps:
            self.last_attn_map = attn_out
        x = add(x, attn_out)

        xn2 = layer_norm(x, self.norm2_gain, self.norm2_bias)
        h = gelu(add(matmul(xn2, self.mlp_w1), self.mlp_b1))
        mlp_out = add(matmul(h, self.mlp_w2), self.mlp_b2)
        if capture_maps:
            self.last_mlp_map = mlp_out
        return add(x, mlp_out)


class TransformerModel:
    """Encoder classifier: token+position embed, blocks, mean pool, head."""

    def __init__(self, config: ModelConfig, tok_embed: Tensor, pos_embed: Tensor,
                 blocks: list[EncoderBlock], head_w: Tensor, head_b: Tensor):
        config.validate()
        self.config = config
        self.tok_embed = tok_embed
        self.pos_embed = pos_embed
        self.blocks = blocks
        self.head_w = head_w
        self.head_b = head_b
        # untrained constant used by the mean-pool matmul
        self._pool = Tensor(np.full((config.seq_len, 1), 1.0 / config.seq_len))
        self._check_shapes()

    def _check_shapes(self) -> None:
        cfg = self.config
        expect = {
            "embed.tok": (cfg.vocab_size, cfg.width),
            "embed.pos": (cfg.seq_len, cfg.width),
            "head.w": (cfg.width, cfg.n_classes),
            "head.b": (cfg.n_classes,),
        }
        for name, t in (("embed.tok", self.tok_embed), ("embed.pos", self.pos_embed),
                        ("head.w", self.head_w), ("head.b", self.head_b)):
            if t.shape != expect[name]:
                raise ShapeError(f"param {name}: expected {expect[name]}, got {t.shape}")
        if len(self.blocks) != cfg.depth:
            raise ShapeError(f"expected {cfg.depth} blocks, got {len(self.blocks)}")

    @classmethod
    def init(cls, config: ModelConfig, seed) -> "TransformerModel":
        """Seeded init: weights N(0, 0.02), biases zero, norm gains one.

        ``seed`` is anything ``np.random.default_rng`` accepts. The draw
        order (embeddings, blocks in order, head) is part of the contract.
        """
        config.validate()
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        tok = Tensor(rng.normal(0.0, _INIT_STD, (config.vocab_size, config.width)))
        pos = Tensor(rng.normal(0.0, _INIT_STD, (config.seq_len, config.width)))
        blocks = [EncoderBlock.init(config, rng) for _ in range(config.depth)]
        head_w = Tensor(rng.normal(0.0, _INIT_STD, (config.width, config.n_classes)))
        head_b = Tensor(np.zeros(config.n_classes))
        return cls(config, tok, pos, blocks, head_w, head_b)

    # -- parameter access ---------------------------------------------------

    def named_params(self) -> Iterator[tuple[str, Tensor]]:
        yield "embed.tok", self.tok_embed
        yield "embed.pos", self.pos_embed
        for i, blk in enumerate(self.blocks):
            for dotted, t in blk.named_params():
                yield f"blocks.{i}.{dotted}", t
        yield "head.w", self.head_w
        yield "head.b", self.head_b

    def params(self) -> list[Tensor]:
        return [t for _, t in self.named_params()]

    def param_count(self) -> int:
        return sum(t.size for t in self.params())

    def set_requires_grad(self, flag: bool) -> None:
        for t in self.params():
            t.requires_grad = flag

    def freeze(self) -> None:
        self.set_requires_grad(False)

    def copy(self) -> "TransformerModel":
        """Deep copy of parameters (same requires_grad flags, caches reset)."""
        def dup(t: Tensor) -> Tensor:
            return Tensor(t.data.copy(), requires_grad=t.requires_grad)

        blocks = []
        for blk in self.blocks:
            blocks.append(EncoderBlock(self.config,
                                       {n: dup(t) for n, t in blk.named_params()}))
        return TransformerModel(self.config, dup(self.tok_embed), dup(self.pos_embed),
                                blocks, dup(self.head_w), dup(self.head_b))

    # -- layer-granular access (ablation, EMA) ------------------------------

    def _check_layer(self, index: int) -> None:
        if not 0 <= index < self.config.depth:
            raise IndexError(f"layer index {index} out of range for depth {self.config.depth}")

    def read_layer_params(self, index: int) -> tuple[np.ndarray, list[tuple[str, tuple[int, ...]]]]:
        """Flat copy of one block's params plus the (name, shape) layout."""
        self._check_layer(index)
        layout = block_param_layout(self.config)
        blk = self.blocks[index]
        vec = np.concatenate([getattr(blk, _field_name(n)).data.ravel() for n, _ in layout])
        return vec, layout

    def write_layer_params(self, index: int, vec: np.ndarray) -> None:
        """Write a flat vector back into one block, in layout order, in place."""
        self._check_layer(index)
        layout = block_param_layout(self.config)
        total = sum(int(np.prod(s)) for _, s in layout)
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (total,):
            raise ShapeError(f"write_layer_params: expected flat shape ({total},), got {vec.shape}")
        blk = self.blocks[index]
        pos = 0
        for dotted, shape in layout:
            n = int(np.prod(shape))
            getattr(blk, _field_name(dotted)).data[...] = vec[pos:pos + n].reshape(shape)
            pos += n

    def ablate_layer(self, index: int) -> "TransformerModel":
        """Copy of the model with block ``index`` zeroed out entirely.

        Zeroing the norm gains makes both sub-modules emit constants that
        the zeroed projections map to zero, so the block reduces to the
        identity on the residual stream.
        """
        self._check_layer(index)
        out = self.copy()
        for _, t in out.blocks[index].named_params():
            t.data[...] = 0.0
        return out

    # -- forward ------------------------------------------------------------

    def _check_tokens(self, tokens: np.ndarray) -> np.ndarray:
        arr = np.asarray(tokens)
        if arr.ndim != 2:
            raise ShapeError(f"forward: tokens must be [batch, seq], got shape {arr.shape}")
        if arr.shape[1] != self.config.seq_len:
            raise ShapeError(
                f"forward: sequence length {arr.shape[1]} != configured {self.config.seq_len}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"forward: tokens must be integers, got dtype {arr.dtype}")
        if arr.size and (arr.min() < 0 or arr.max() >= self.config.vocab_size):
            raise ValueError(
                f"forward: token ids must lie in [0, {self.config.vocab_size}), "
                f"got range [{arr.min()}, {arr.max()}]")
        if arr.shape[0] == 0:
            raise ShapeError("forward: empty batch")
        return arr

    def forward(self, tokens: np.ndarray, capture_maps: bool = False) -> Tensor:
        """Logits [batch, n_classes] for integer token ids [batch, seq]."""
        arr = self._check_tokens(tokens)
        batch = arr.shape[0]
        cfg = self.config
        onehot = Tensor(np.eye(cfg.vocab_size)[arr])
        x = add(matmul(onehot, self.tok_embed), self.pos_embed)
        for blk in self.blocks:
            x = blk.forward(x, capture_maps=capture_maps)
        pooled = reshape(matmul(transpose(x, (0, 2, 1)), self._pool),
                         (batch, cfg.width))
        return add(matmul(pooled, self.head_w), self.head_b)

    def attn_maps(self) -> list[np.ndarray]:
        """Captured attention module outputs, one per block, as arrays."""
        maps = []
        for i, blk in enumerate(self.blocks):
            if blk.last_attn_map is None:
                raise RuntimeError(f"block {i} has no captured map; forward with capture_maps=True first")
            maps.append(blk.last_attn_map.data)
        return maps

    def mlp_maps(self) -> list[np.ndarray]:
        maps = []
        for i, blk in enumerate(self.blocks):
            if blk.last_mlp_map is None:
                raise RuntimeError(f"block {i} has no captured map; forward with capture_maps=True first")
            maps.append(blk.last_mlp_map.data)
        return maps
