"""Analysis instruments: layer saliency, linear CKA, parameter variation.

All three are read-only measurements. Forwards run with the gradient tape
disabled, so analysing a model mid-training never perturbs its run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .model import TransformerModel, block_param_layout, _field_name
from .tensor_core import ShapeError, no_grad
from .uda_data import LabeledSplit, TokenBatch


def split_eval_batches(split: LabeledSplit, batch_size: int = 64,
                       limit: int | None = None) -> list[TokenBatch]:
    """Deterministic, order-preserving batches over a labeled split.

    Unlike training batching there is no shuffling and nothing is dropped;
    ``limit`` caps the number of examples used.
    """
    n = len(split) if limit is None else min(limit, len(split))
    if n == 0:
        raise ValueError("split_eval_batches: split is empty")
    out = []
    for start in range(0, n, batch_size):
        stop = min(start + batch_size, n)
        out.append(TokenBatch(split.tokens[start:stop], split.labels[start:stop]))
    return out


def model_accuracy(model: TransformerModel, batches: Sequence[TokenBatch]) -> float:
    """Fraction of examples whose argmax logit matches the label."""
    correct = 0
    total = 0
    with no_grad():
        for batch in batches:
            if batch.labels is None:
                raise ValueError("model_accuracy: batch has no labels")
            logits = model.forward(batch.tokens).data
            correct += int(np.sum(np.argmax(logits, axis=-1) == batch.labels))
            total += len(batch)
    if total == 0:
        raise ValueError("model_accuracy: no examples")
    return correct / total


# ---------------------------------------------------------------------------
# Layer saliency
# ---------------------------------------------------------------------------

@dataclass
class LayerSaliency:
    layer: int
    lsr: float
    is_salient: bool


@dataclass
class LsrReport:
    baseline_accuracy: float
    threshold: float
    layers: list[LayerSaliency] = field(default_factory=list)

    def to_json(self) -> dict:
        classes = classify_layers(self)
        return {
            "baseline_accuracy": self.baseline_accuracy,
            "threshold": self.threshold,
            "layers": [{"layer": s.layer, "lsr": s.lsr, "is_salient": s.is_salient}
                       for s in self.layers],
            "salient": classes.salient,
            "non_salient": classes.non_salient,
        }


class LayerClasses(NamedTuple):
    salient: list[int]
    non_salient: list[int]


def layer_saliency(model: TransformerModel, eval_batches: Sequence[TokenBatch],
                   threshold: float) -> LsrReport:
    """Score each layer by how much zeroing it moves eval accuracy.

    The score for layer i is |accuracy(model) - accuracy(model without
    layer i)|, where removal means zeroing every parameter of the block
    (an exact identity for pre-norm blocks). Layers scoring at or above
    ``threshold`` are salient.
    """
    if threshold < 0:
        raise ValueError("layer_saliency: threshold must be non-negative")
    batches = list(eval_batches)
    if not batches:
        raise ValueError("layer_saliency: empty evaluation set")
    base = model_accuracy(model, batches)
    report = LsrReport(baseline_accuracy=base, threshold=threshold)
    for i in range(model.config.depth):
        acc = model_accuracy(model.ablate_layer(i), batches)
        lsr = abs(base - acc)
        report.layers.append(LayerSaliency(layer=i, lsr=lsr,
                                           is_salient=lsr >= threshold))
    return report


def classify_layers(report: LsrReport) -> LayerClasses:
    salient = [s.layer for s in report.layers if s.is_salient]
    non_salient = [s.layer for s in report.layers if not s.is_salient]
    return LayerClasses(salient, non_salient)


# ---------------------------------------------------------------------------
# Linear CKA
# ---------------------------------------------------------------------------

def linear_cka(x: np.ndarray, y: np.ndarray) -> float:
    """Linear centered kernel alignment between two feature matrices.

    ``x`` is [n, p1], ``y`` is [n, p2], rows are the same n examples. With
    column-centered Xc, Yc:

        CKA = ||Yc^T Xc||_F^2 / (||Xc^T Xc||_F * ||Yc^T Yc||_F)

    Invariant to orthogonal transforms and isotropic scaling of either
    side. Raises on fewer than two examples or zero-variance features.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2:
        raise ShapeError(f"linear_cka: inputs must be 2-D, got {x.shape} and {y.shape}")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"linear_cka: row counts differ: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2:
        raise ValueError("linear_cka: need at least two examples")
    xc = x - x.mean(axis=0, keepdims=True)
    yc = y - y.mean(axis=0, keepdims=True)
    num = np.linalg.norm(yc.T @ xc, ord="fro") ** 2
    den = (np.linalg.norm(xc.T @ xc, ord="fro")
           * np.linalg.norm(yc.T @ yc, ord="fro"))
    if den == 0.0:
        raise ValueError("linear_cka: a side has zero variance after centering")
    return float(num / den)


@dataclass
class CkaHeatmap:
    values: np.ndarray           # [n_row_modules, n_col_modules]
    row_labels: list[str]
    col_labels: list[str]

    def to_json(self) -> dict:
        return {
            "row_labels": self.row_labels,
            "col_labels": self.col_labels,
            "values": [[float(v) for v in row] for row in self.values],
        }


def _module_features(model: TransformerModel, batches: Sequence[TokenBatch]) -> tuple[list[str], list[np.ndarray]]:
    """Per-module flattened activations: for each block, the attention map
    and the MLP map, each reshaped to [n_examples, tokens * width]."""
    per_batch: list[list[np.ndarray]] = []
    with no_grad():
        for batch in batches:
            model.forward(batch.tokens, capture_maps=True)
            feats = []
            for a in model.attn_maps():
                feats.append(a.reshape(a.shape[0], -1))
            for m in model.mlp_maps():
                feats.append(m.reshape(m.shape[0], -1))
            per_batch.append(feats)
    depth = model.config.depth
    labels = [f"block{i}.attn" for i in range(depth)] + [f"block{i}.mlp" for i in range(depth)]
    # interleave attn/mlp per block for readable axes
    order = [i for pair in zip(range(depth), range(depth, 2 * depth)) for i in pair]
    labels = [labels[i] for i in order]
    stacked = [np.concatenate([feats[i] for feats in per_batch]) for i in order]
    return labels, stacked


def cross_model_cka(model_a: TransformerModel, model_b: TransformerModel,
                    batches: Sequence[TokenBatch]) -> CkaHeatmap:
    """CKA between every module of ``model_a`` and every module of ``model_b``.

    A module is a block's attention output or MLP output. Both models see
    the same batches, so rows are aligned examples.
    """
    batches = list(batches)
    if not batches:
        raise ValueError("cross_model_cka: empty batch list")
    row_labels, row_feats = _module_features(model_a, batches)
    col_labels, col_feats = _module_features(model_b, batches)
    values = np.empty((len(row_feats), len(col_feats)))
    for i, xf in enumerate(row_feats):
        for j, yf in enumerate(col_feats):
            values[i, j] = linear_cka(xf, yf)
    return CkaHeatmap(values=values, row_labels=row_labels, col_labels=col_labels)


# ---------------------------------------------------------------------------
# Parameter variation
# ---------------------------------------------------------------------------

_PVR_MODULES = ("attn", "mlp")


def pvr(model_a: TransformerModel, model_b: TransformerModel,
        layer: int, module: str) -> float:
    """Mean absolute parameter difference for one (layer, module) pair.

    ``module`` is "attn" or "mlp"; norm parameters belong to neither.
    Requires identical shapes layer-for-layer.
    """
    if module not in _PVR_MODULES:
        raise ValueError(f"pvr: module must be one of {_PVR_MODULES}, got {module!r}")
    model_a._check_layer(layer)
    model_b._check_layer(layer)
    prefix = module + "."
    diffs = []
    for (name, _) in block_param_layout(model_a.config):
        if not name.startswith(prefix):
            continue
        ta = getattr(model_a.blocks[layer], _field_name(name)).data
        tb = getattr(model_b.blocks[layer], _field_name(name)).data
        if ta.shape != tb.shape:
            raise ShapeError(f"pvr: {name} shapes differ at layer {layer}: "
                             f"{ta.shape} vs {tb.shape}")
        diffs.append(np.abs(ta - tb).ravel())
    stacked = np.concatenate(diffs)
    return float(stacked.mean())


@dataclass
class PvrEntry:
    layer: int
    module: str
    value: float


@dataclass
class PvrReport:
    entries: list[PvrEntry]

    def to_json(self) -> dict:
        return {"entries": [{"layer": e.layer, "module": e.module, "value": e.value}
                            for e in self.entries]}

    def as_grid(self) -> tuple[np.ndarray, list[str], list[str]]:
        layers = sorted({e.layer for e in self.entries})
        grid = np.zeros((len(layers), len(_PVR_MODULES)))
        for e in self.entries:
            grid[layers.index(e.layer), _PVR_MODULES.index(e.module)] = e.value
        return grid, [f"layer{i}" for i in layers], list(_PVR_MODULES)


def pvr_report(model_a: TransformerModel, model_b: TransformerModel) -> PvrReport:
    """PVR for every (layer, module) pair; depths must match."""
    if model_a.config.depth != model_b.config.depth:
        raise ShapeError("pvr_report: models have different depths")
    entries = [PvrEntry(layer=i, module=m, value=pvr(model_a, model_b, i, m))
               for i in range(model_a.config.depth) for m in _PVR_MODULES]
    return PvrReport(entries=entries)
