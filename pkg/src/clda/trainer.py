"""Training loops: teacher baseline and the collaborative three-stage run.

The collaborative run trains a shallow student by distilling a frozen deep
teacher on unlabeled target batches (plus supervised source batches), and
after a mapping is fixed it flows information back: selected teacher blocks
are EMA-blended toward their best-matching student blocks. The teacher is
never backpropagated; its parameters only move through the EMA blend.

Stage schedule over steps t = 1..total_steps:

* stage 1 (t < t2): distillation only;
* stage 2 (t2 <= t <= t3): at t2, score teacher layers by saliency and
  randomly pick a fraction of the non-salient ones (the set gamma); during
  the window, accumulate per-pair similarity between each gamma layer's
  attention map and every student layer's attention map;
* stage 3 (t > t3): at t3 the accumulated similarities fix the mapping
  i_star(gamma); afterwards each selected teacher block is EMA-updated
  toward its mapped student block every step.

Distillation continues through every stage.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .analysis import (
    LsrReport, classify_layers, layer_saliency, model_accuracy,
    split_eval_batches,
)
from .model import ModelConfig, TransformerModel
from .tensor_core import (
    Adam, SGD, NumericError, ShapeError, Tensor, add, backward, log, mean,
    mul, no_grad, scale, softmax,
)
from .uda_data import DomainData, DomainDatasetSpec, TokenBatch, batch_iter

MAPPING_MODES = ("channel", "token", "both", "random", "none")
LSR_MODES = ("oracle", "proxy")
OPTIMIZERS = ("adam", "sgd")

# rng stream ids; every consumer of randomness gets its own namespaced
# stream so ablation arms share identical data and init draws
_STREAM_TEACHER_INIT = 100
_STREAM_STUDENT_INIT = 101
_STREAM_SOURCE_DATA = 201
_STREAM_TARGET_DATA = 202
_STREAM_MAPPING = 301

_SOURCE_PROBE_LIMIT = 512


class ConfigError(ValueError):
    """A run configuration is inconsistent or out of range."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class TeacherConfig:
    total_steps: int = 3000
    lr: float = 3e-3
    conf_threshold: float = 0.968
    batch_size: int = 32
    seed: int = 0
    depth: int = 8
    width: int = 32
    mlp_width: int = 64
    self_training: bool = True
    # steps of source-only training before the self-training term activates;
    # guards against early confirmation bias from confident-but-wrong labels
    warmup_steps: int = 0
    optimizer: str = "adam"
    eval_every: int = 100

    def validate(self) -> None:
        if self.total_steps < 1:
            raise ConfigError("total_steps must be >= 1")
        if self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be non-negative")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if not 0.0 < self.conf_threshold <= 1.0:
            raise ConfigError("conf_threshold must lie in (0, 1]")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if min(self.depth, self.width, self.mlp_width) < 1:
            raise ConfigError("depth, width and mlp_width must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")


@dataclass(frozen=True)
class CldaConfig:
    total_steps: int = 3000
    t2: int = 1000
    t3: int = 1500
    ema_alpha: float = 0.999
    lr: float = 3e-3
    conf_threshold: float = 0.968
    lsr_threshold: float = 0.003
    select_fraction: float = 0.3
    batch_size: int = 32
    seed: int = 0
    mapping: str = "channel"
    student_depth: int = 4
    lsr_mode: str = "oracle"
    optimizer: str = "adam"
    eval_every: int = 100

    def validate(self) -> None:
        if self.total_steps < 1:
            raise ConfigError("total_steps must be >= 1")
        # boundaries are meaningless when the mapping machinery is off
        if self.mapping != "none" and not 0 <= self.t2 <= self.t3 <= self.total_steps:
            raise ConfigError(
                f"stage boundaries must satisfy 0 <= t2 <= t3 <= total_steps, "
                f"got t2={self.t2}, t3={self.t3}, total_steps={self.total_steps}")
        if not 0.0 <= self.ema_alpha <= 1.0:
            raise ConfigError("ema_alpha must lie in [0, 1]")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if not 0.0 < self.conf_threshold <= 1.0:
            raise ConfigError("conf_threshold must lie in (0, 1]")
        if self.lsr_threshold < 0:
            raise ConfigError("lsr_threshold must be non-negative")
        if not 0.0 < self.select_fraction <= 1.0:
            raise ConfigError("select_fraction must lie in (0, 1]")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.mapping not in MAPPING_MODES:
            raise ConfigError(f"mapping must be one of {MAPPING_MODES}, got {self.mapping!r}")
        if self.student_depth < 1:
            raise ConfigError("student_depth must be >= 1")
        if self.lsr_mode not in LSR_MODES:
            raise ConfigError(f"lsr_mode must be one of {LSR_MODES}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")


# ---------------------------------------------------------------------------
# Pseudo-labels and losses
# ---------------------------------------------------------------------------

def softmax_probs(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis (plain numpy)."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def hard_labels(logits: np.ndarray) -> np.ndarray:
    """Per-row argmax; ties resolve to the lowest index."""
    logits = np.asarray(logits)
    if logits.ndim < 1:
        raise ShapeError("hard_labels: logits must have a class axis")
    if not np.all(np.isfinite(logits)):
        raise ValueError("hard_labels: logits contain non-finite values")
    return np.argmax(logits, axis=-1)


def quality_estimate(probs: np.ndarray, tau: float) -> np.ndarray:
    """Binary quality: 1.0 where the top probability reaches ``tau``."""
    probs = np.asarray(probs, dtype=np.float64)
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"quality_estimate: tau must lie in (0, 1], got {tau}")
    sums = probs.sum(axis=-1)
    if np.any(probs < -1e-9) or not np.allclose(sums, 1.0, atol=1e-6):
        raise ValueError("quality_estimate: rows must be probability distributions")
    return (probs.max(axis=-1) >= tau).astype(np.float64)


@dataclass
class PseudoLabelBatch:
    labels: np.ndarray   # [batch] int
    quality: np.ndarray  # [batch] float, each 0.0 or 1.0


def make_pseudo_labels(logits: np.ndarray, tau: float) -> PseudoLabelBatch:
    probs = softmax_probs(logits)
    return PseudoLabelBatch(labels=hard_labels(logits),
                            quality=quality_estimate(probs, tau))


def _weighted_nll(logits: Tensor, weights: np.ndarray) -> Tensor:
    # mean over rows of -sum_c w[r, c] * log softmax(logits)[r, c];
    # mean() divides by rows * classes, so rescale by -classes
    n_classes = logits.shape[-1]
    lp = log(softmax(logits))
    return scale(mean(mul(lp, Tensor(weights))), -float(n_classes))


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross entropy of integer labels under softmax(logits)."""
    if len(logits.shape) != 2:
        raise ShapeError(f"cross_entropy: logits must be 2-D, got {logits.shape}")
    b, k = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (b,):
        raise ShapeError(f"cross_entropy: labels shape {labels.shape} != ({b},)")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"cross_entropy: label outside [0, {k})")
    w = np.zeros((b, k))
    w[np.arange(b), labels] = 1.0
    return _weighted_nll(logits, w)


def distill_loss(student_logits: Tensor, pseudo: PseudoLabelBatch) -> Tensor:
    """Quality-gated pseudo-label cross entropy, averaged over the batch.

    Rows with quality 0 contribute nothing to the loss or its gradient;
    the average still divides by the full batch size.
    """
    if len(student_logits.shape) != 2:
        raise ShapeError(f"distill_loss: logits must be 2-D, got {student_logits.shape}")
    b, k = student_logits.shape
    if pseudo.labels.shape != (b,) or pseudo.quality.shape != (b,):
        raise ShapeError("distill_loss: pseudo-label arrays do not match batch size")
    if pseudo.labels.size and (pseudo.labels.min() < 0 or pseudo.labels.max() >= k):
        raise ValueError(f"distill_loss: pseudo-label outside [0, {k})")
    w = np.zeros((b, k))
    w[np.arange(b), pseudo.labels] = pseudo.quality
    return _weighted_nll(student_logits, w)


# ---------------------------------------------------------------------------
# Layer similarity and mapping
# ---------------------------------------------------------------------------

def _as_map_pair(map_a, map_b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(map_a, dtype=np.float64)
    b = np.asarray(map_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"similarity: map shapes differ: {a.shape} vs {b.shape}")
    if a.ndim < 2:
        raise ShapeError(f"similarity: maps must have a channel axis, got shape {a.shape}")
    return a, b


def _cos_columns(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    num = (a * b).sum(axis=0)
    den = np.linalg.norm(a, axis=0) * np.linalg.norm(b, axis=0)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def channel_similarity(map_a, map_b) -> float:
    """Sum over channels of the cosine between per-channel responses.

    Each channel's response is the map flattened over all leading axes
    (batch and token). A channel with zero norm on either side contributes
    zero rather than NaN.
    """
    a, b = _as_map_pair(map_a, map_b)
    c = a.shape[-1]
    return float(_cos_columns(a.reshape(-1, c), b.reshape(-1, c)).sum())


def token_similarity(map_a, map_b) -> float:
    """Sum over token positions (all batch rows) of per-token cosines."""
    a, b = _as_map_pair(map_a, map_b)
    c = a.shape[-1]
    return float(_cos_columns(a.reshape(-1, c).T, b.reshape(-1, c).T).sum())


def flat_similarity(map_a, map_b) -> float:
    """Single cosine between the fully flattened maps."""
    a, b = _as_map_pair(map_a, map_b)
    return float(_cos_columns(a.reshape(-1, 1), b.reshape(-1, 1))[0])


_SIM_FNS = {
    "channel": channel_similarity,
    "token": token_similarity,
    "both": flat_similarity,
}


@dataclass
class MappingState:
    """Similarity evidence accumulated over the stage-2 window."""
    gamma: list[int]
    accum: np.ndarray  # [len(gamma), n_student_layers]


def select_mapping(state: MappingState) -> dict[int, int]:
    """argmax per selected teacher layer; ties resolve to the lowest index."""
    if not state.gamma:
        raise ValueError("select_mapping: no selected layers")
    accum = np.asarray(state.accum, dtype=np.float64)
    if accum.ndim != 2 or accum.shape[0] != len(state.gamma):
        raise ShapeError(f"select_mapping: accumulator shape {accum.shape} does not "
                         f"match {len(state.gamma)} selected layers")
    if accum.shape[1] == 0:
        raise ValueError("select_mapping: accumulator has no student layers")
    return {g: int(np.argmax(accum[r])) for r, g in enumerate(state.gamma)}


def ema_update(teacher: TransformerModel, teacher_layer: int,
               student: TransformerModel, student_layer: int,
               alpha: float) -> None:
    """Blend one teacher block toward one student block, in place:

        teacher_block <- alpha * teacher_block + (1 - alpha) * student_block

    Endpoints are exact (alpha=1 leaves the teacher bitwise untouched,
    alpha=0 copies the student), and each blended value is clamped into the
    closed interval between the two inputs so the convex-combination
    contract survives floating-point rounding.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"ema_update: alpha must lie in [0, 1], got {alpha}")
    vt, _ = teacher.read_layer_params(teacher_layer)
    vs, _ = student.read_layer_params(student_layer)
    if vt.shape != vs.shape:
        raise ShapeError(f"ema_update: block sizes differ: {vt.shape} vs {vs.shape}")
    if alpha == 1.0:
        return
    if alpha == 0.0:
        teacher.write_layer_params(teacher_layer, vs)
        return
    blended = alpha * vt + (1.0 - alpha) * vs
    np.clip(blended, np.minimum(vt, vs), np.maximum(vt, vs), out=blended)
    teacher.write_layer_params(teacher_layer, blended)


# ---------------------------------------------------------------------------
# Run plumbing
# ---------------------------------------------------------------------------

def _stream_batches(split, batch_size: int, stream_id: int, seed: int) -> Iterator[TokenBatch]:
    epoch = 0
    while True:
        yield from batch_iter(split, batch_size, (stream_id, int(seed), epoch))
        epoch += 1


def _make_optimizer(name: str, params, lr: float):
    if name == "adam":
        return Adam(params, lr)
    return SGD(params, lr)


def _model_config_for(spec: DomainDatasetSpec, depth: int, width: int,
                      mlp_width: int) -> ModelConfig:
    return ModelConfig(vocab_size=spec.vocab_size, seq_len=spec.seq_len,
                       width=width, mlp_width=mlp_width,
                       n_classes=spec.n_classes, depth=depth)


def _check_compat(model_config: ModelConfig, spec: DomainDatasetSpec) -> None:
    pairs = (("vocab_size", model_config.vocab_size, spec.vocab_size),
             ("seq_len", model_config.seq_len, spec.seq_len),
             ("n_classes", model_config.n_classes, spec.n_classes))
    for name, mv, dv in pairs:
        if mv != dv:
            raise ConfigError(f"model/data mismatch: {name} is {mv} in the model "
                              f"but {dv} in the dataset")


def _check_batch_size(batch_size: int, data: DomainData) -> None:
    smallest = min(len(data.source), len(data.target_train))
    if batch_size > smallest:
        raise ConfigError(f"batch_size {batch_size} exceeds smallest training "
                          f"split ({smallest} examples)")


def _assert_teacher_untracked(teacher: TransformerModel) -> None:
    for name, p in teacher.named_params():
        if p.requires_grad or p.grad is not None:
            raise AssertionError(f"teacher param {name} became gradient-tracked")


def _proxy_eval_batches(teacher: TransformerModel, target_tokens: np.ndarray,
                        batch_size: int, tau: float,
                        limit: int = 512) -> list[TokenBatch]:
    """Label-free saliency probe: the teacher's own confident predictions.

    Saliency then measures self-agreement drop instead of true accuracy
    drop. Falls back to all predictions if none clear the threshold.
    """
    tokens = target_tokens[:limit]
    kept_tokens, kept_labels = [], []
    all_tokens, all_labels = [], []
    with no_grad():
        for start in range(0, tokens.shape[0], batch_size):
            chunk = tokens[start:start + batch_size]
            logits = teacher.forward(chunk).data
            pseudo = make_pseudo_labels(logits, tau)
            mask = pseudo.quality > 0.5
            all_tokens.append(chunk)
            all_labels.append(pseudo.labels)
            if mask.any():
                kept_tokens.append(chunk[mask])
                kept_labels.append(pseudo.labels[mask])
    if not kept_tokens:
        kept_tokens, kept_labels = all_tokens, all_labels
    toks = np.concatenate(kept_tokens)
    labs = np.concatenate(kept_labels)
    return [TokenBatch(toks[i:i + batch_size], labs[i:i + batch_size])
            for i in range(0, toks.shape[0], batch_size)]


# ---------------------------------------------------------------------------
# Teacher baseline
# ---------------------------------------------------------------------------

@dataclass
class TeacherResult:
    model: TransformerModel
    metrics: list[dict] = field(default_factory=list)


def train_teacher_baseline(config: TeacherConfig, data: DomainData) -> TeacherResult:
    """Supervised source training, optionally with confidence-gated
    self-training on unlabeled target batches.

    Also used for source-only baselines of any depth by passing
    ``self_training=False``.
    """
    config.validate()
    _check_batch_size(config.batch_size, data)
    model_cfg = _model_config_for(data.spec, config.depth, config.width,
                                  config.mlp_width)
    model = TransformerModel.init(model_cfg, (int(config.seed), _STREAM_TEACHER_INIT))
    model.set_requires_grad(True)
    opt = _make_optimizer(config.optimizer, model.params(), config.lr)
    src_stream = _stream_batches(data.source, config.batch_size,
                                 _STREAM_SOURCE_DATA, config.seed)
    tgt_stream = _stream_batches(data.target_train, config.batch_size,
                                 _STREAM_TARGET_DATA, config.seed)
    eval_batches = split_eval_batches(data.target_eval, config.batch_size)
    source_probe = split_eval_batches(data.source, config.batch_size,
                                      limit=_SOURCE_PROBE_LIMIT)
    metrics: list[dict] = []

    for t in range(1, config.total_steps + 1):
        src = next(src_stream)
        tgt = next(tgt_stream)
        self_train_active = config.self_training and t > config.warmup_steps
        try:
            loss = cross_entropy(model.forward(src.tokens), src.labels)
            mean_q = 0.0
            if self_train_active:
                tgt_logits = model.forward(tgt.tokens)
                pseudo = make_pseudo_labels(tgt_logits.data, config.conf_threshold)
                mean_q = float(pseudo.quality.mean())
                loss = add(loss, distill_loss(tgt_logits, pseudo))
            loss_val = loss.item()
        except NumericError as exc:
            raise DivergenceError(f"step {t}: {exc}") from exc
        if not np.isfinite(loss_val):
            raise DivergenceError(f"step {t}: loss is {loss_val}")
        backward(loss)
        opt.step()
        if t % config.eval_every == 0 or t == config.total_steps:
            if not self_train_active:
                with no_grad():
                    logits = model.forward(tgt.tokens).data
                mean_q = float(make_pseudo_labels(
                    logits, config.conf_threshold).quality.mean())
            metrics.append({
                "step": t,
                "source_acc": model_accuracy(model, source_probe),
                "target_acc": model_accuracy(model, eval_batches),
                "mean_q": mean_q,
            })
    return TeacherResult(model=model, metrics=metrics)


# ---------------------------------------------------------------------------
# Collaborative run
# ---------------------------------------------------------------------------

@dataclass
class CldaResult:
    student: TransformerModel
    teacher: TransformerModel
    metrics: list[dict] = field(default_factory=list)
    events: list[tuple[int, str]] = field(default_factory=list)
    gamma: list[int] = field(default_factory=list)
    i_star: dict[int, int] = field(default_factory=dict)
    lsr_report: LsrReport | None = None


def _stage_of(t: int, config: CldaConfig) -> int:
    if config.mapping == "none" or t < config.t2:
        return 1
    if t <= config.t3:
        return 2
    return 3


def run_clda(config: CldaConfig, teacher: TransformerModel,
             data: DomainData) -> CldaResult:
    """The collaborative loop. The input teacher is copied, frozen, and the
    copy is the one the EMA feedback updates; the caller's model is left
    untouched. With ``mapping="none"`` the run reduces to pure distillation
    and no stage-2/3 machinery executes at all.
    """
    config.validate()
    _check_compat(teacher.config, data.spec)
    _check_batch_size(config.batch_size, data)

    teacher = teacher.copy()
    teacher.freeze()
    student_cfg = dataclasses.replace(teacher.config, depth=config.student_depth)
    student = TransformerModel.init(student_cfg, (int(config.seed), _STREAM_STUDENT_INIT))
    student.set_requires_grad(True)
    opt = _make_optimizer(config.optimizer, student.params(), config.lr)

    src_stream = _stream_batches(data.source, config.batch_size,
                                 _STREAM_SOURCE_DATA, config.seed)
    tgt_stream = _stream_batches(data.target_train, config.batch_size,
                                 _STREAM_TARGET_DATA, config.seed)
    eval_batches = split_eval_batches(data.target_eval, config.batch_size)
    source_probe = split_eval_batches(data.source, config.batch_size,
                                      limit=_SOURCE_PROBE_LIMIT)
    map_rng = np.random.default_rng([_STREAM_MAPPING, int(config.seed)])

    mapping_on = config.mapping != "none"
    sim_fn = _SIM_FNS.get(config.mapping)
    result = CldaResult(student=student, teacher=teacher)
    accum: np.ndarray | None = None
    mean_q = 0.0

    def saliency_pass(step: int) -> None:
        if config.lsr_mode == "oracle":
            probe = eval_batches
        else:
            probe = _proxy_eval_batches(teacher, data.target_train.tokens,
                                        config.batch_size, config.conf_threshold)
        report = layer_saliency(teacher, probe, config.lsr_threshold)
        result.lsr_report = report
        result.events.append((step, "lsr"))
        non_salient = classify_layers(report).non_salient
        if non_salient:
            k = max(1, int(len(non_salient) * config.select_fraction + 0.5))
            chosen = map_rng.choice(non_salient, size=k, replace=False)
            result.gamma = sorted(int(g) for g in chosen)
        result.events.append((step, "gamma"))

    def fix_mapping(step: int) -> None:
        if result.gamma:
            if config.mapping == "random":
                result.i_star = {g: int(map_rng.integers(0, config.student_depth))
                                 for g in result.gamma}
            else:
                result.i_star = select_mapping(MappingState(result.gamma, accum))
        result.events.append((step, "mapping_fixed"))

    if mapping_on and config.t2 == 0:
        saliency_pass(0)
        accum = np.zeros((len(result.gamma), config.student_depth))
        if config.t3 == 0:
            fix_mapping(0)

    for t in range(1, config.total_steps + 1):
        if mapping_on and t == config.t2:
            saliency_pass(t)
            accum = np.zeros((len(result.gamma), config.student_depth))

        in_window = (mapping_on and sim_fn is not None and result.gamma
                     and config.t2 <= t <= config.t3)

        src = next(src_stream)
        tgt = next(tgt_stream)
        with no_grad():
            teacher_logits = teacher.forward(tgt.tokens, capture_maps=in_window)
        pseudo = make_pseudo_labels(teacher_logits.data, config.conf_threshold)
        mean_q = float(pseudo.quality.mean())

        try:
            sup = cross_entropy(student.forward(src.tokens), src.labels)
            dist = distill_loss(student.forward(tgt.tokens), pseudo)
            loss = add(sup, dist)
            loss_val = loss.item()
        except NumericError as exc:
            raise DivergenceError(f"step {t}: {exc}") from exc
        if not np.isfinite(loss_val):
            raise DivergenceError(f"step {t}: loss is {loss_val}")
        backward(loss)
        opt.step()

        if in_window:
            teacher_maps = teacher.attn_maps()
            with no_grad():
                student.forward(tgt.tokens, capture_maps=True)
            student_maps = student.attn_maps()
            for row, g in enumerate(result.gamma):
                for i in range(config.student_depth):
                    accum[row, i] += sim_fn(teacher_maps[g], student_maps[i])
            result.events.append((t, "accumulate"))

        if mapping_on and t == config.t3:
            fix_mapping(t)

        if mapping_on and t > config.t3 and result.i_star:
            for g, i in result.i_star.items():
                ema_update(teacher, g, student, i, config.ema_alpha)
            result.events.append((t, "ema"))

        if t % config.eval_every == 0 or t == config.total_steps:
            _assert_teacher_untracked(teacher)
            result.metrics.append({
                "step": t,
                "teacher_target_acc": model_accuracy(teacher, eval_batches),
                "student_target_acc": model_accuracy(student, eval_batches),
                "student_source_acc": model_accuracy(student, source_probe),
                "mean_q": mean_q,
                "stage": _stage_of(t, config),
                "gamma_set": list(result.gamma),
                "i_star_map": {str(g): int(i) for g, i in result.i_star.items()},
            })
    return result


def train_kd(config: CldaConfig, teacher: TransformerModel,
             data: DomainData) -> CldaResult:
    """Distillation-only baseline: the collaborative run with mapping off."""
    return run_clda(dataclasses.replace(config, mapping="none"), teacher, data)
