"""Synthetic source/target token classification data with a tunable shift.

Each class has a prototype sequence. Half of the positions are "signal"
slots whose prototype tokens are distinct across classes; the rest are
nuisance slots. Sampling resamples each position uniformly with a fixed
noise probability, so class evidence is redundant but individually noisy.

The target domain differs from the source in two ways, both gated by the
shift level ``s``:

* a fixed-size subset (fraction s) of nuisance slots has its prototype
  column rotated between classes, each slot by its own offset, so
  class-conditional nuisance statistics move without all slots agreeing
  on the same wrong class;
* a fixed-size subset (fraction s/2) of all positions has a fixed
  vocabulary permutation applied after sampling, a systematic covariate
  shift.

Subset sizes are deterministic in s, so two datasets at the same shift
level are comparably hard. At ``s = 0`` both subsets are empty and the
target process is identical to the source process. Splits and batching
are seeded and reproducible.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

# per-position uniform resample probability during sampling
NOISE_PROB = 0.5
# fraction of positions (scaled by shift) hit by the vocabulary remap
SUBST_RATE = 0.5

_LAYOUT_STREAM = 0
_SOURCE_STREAM = 1
_TARGET_STREAM = 2
_EVAL_STREAM = 3


class DataError(Exception):
    """Dataset input cannot be read or fails validation."""


class CsvFormatError(DataError):
    """Malformed CSV content; message names the offending line."""


@dataclass(frozen=True)
class DomainDatasetSpec:
    seed: int = 0
    vocab_size: int = 32
    seq_len: int = 16
    n_classes: int = 4
    shift: float = 0.6
    n_source: int = 2048
    n_target: int = 2048
    n_eval: int = 512

    def validate(self) -> None:
        if self.vocab_size < self.n_classes:
            raise ValueError("vocab_size must be >= n_classes for distinct signal tokens")
        if self.seq_len < 2:
            raise ValueError("seq_len must be at least 2")
        if self.n_classes < 2:
            raise ValueError("n_classes must be at least 2")
        if not 0.0 <= self.shift <= 1.0:
            raise ValueError(f"shift must lie in [0, 1], got {self.shift}")
        for name in ("n_source", "n_target", "n_eval"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class LabeledSplit:
    tokens: np.ndarray  # [n, seq_len] int64
    labels: np.ndarray  # [n] int64

    def __post_init__(self):
        if self.tokens.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("LabeledSplit: tokens must be 2-D and labels 1-D")
        if self.tokens.shape[0] != self.labels.shape[0]:
            raise ValueError("LabeledSplit: tokens and labels disagree on length")

    def __len__(self) -> int:
        return self.tokens.shape[0]


@dataclass
class UnlabeledSplit:
    # deliberately has no label field: code holding this type cannot peek
    tokens: np.ndarray  # [n, seq_len] int64

    def __post_init__(self):
        if self.tokens.ndim != 2:
            raise ValueError("UnlabeledSplit: tokens must be 2-D")

    def __len__(self) -> int:
        return self.tokens.shape[0]


@dataclass
class TokenBatch:
    tokens: np.ndarray            # [batch, seq_len] int64
    labels: np.ndarray | None = None

    def __len__(self) -> int:
        return self.tokens.shape[0]


@dataclass
class DomainData:
    spec: DomainDatasetSpec
    source: LabeledSplit
    target_train: UnlabeledSplit
    target_eval: LabeledSplit


def _balanced_labels(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    # exact round-robin counts, shuffled; class sizes differ by at most one
    return rng.permutation(np.arange(n, dtype=np.int64) % k)


def _sample_tokens(protos: np.ndarray, labels: np.ndarray, vocab: int,
                   rng: np.random.Generator,
                   remap: tuple[np.ndarray, np.ndarray] | None) -> np.ndarray:
    tokens = protos[labels].copy()
    n, seq = tokens.shape
    resample = rng.random((n, seq)) < NOISE_PROB
    fresh = rng.integers(0, vocab, (n, seq), dtype=np.int64)
    tokens = np.where(resample, fresh, tokens)
    if remap is not None:
        perm, mask = remap
        tokens[:, mask] = perm[tokens[:, mask]]
    return tokens


def gen_synthetic_domains(spec: DomainDatasetSpec) -> DomainData:
    """Generate source, unlabeled target-train, and labeled target-eval splits."""
    spec.validate()
    n, v, k = spec.seq_len, spec.vocab_size, spec.n_classes
    layout_rng = np.random.default_rng([_LAYOUT_STREAM, spec.seed])

    order = layout_rng.permutation(n)
    signal = np.zeros(n, dtype=bool)
    signal[order[: n // 2]] = True

    protos = np.empty((k, n), dtype=np.int64)
    for p in range(n):
        if signal[p]:
            protos[:, p] = layout_rng.choice(v, size=k, replace=False)
        else:
            protos[:, p] = layout_rng.integers(0, v, size=k)

    # class-conditional shift: rotate prototype content of some nuisance
    # slots, each by its own class offset so errors do not align
    nuisance = np.flatnonzero(~signal)
    n_rot = int(round(spec.shift * nuisance.size))
    rotated = layout_rng.choice(nuisance, size=n_rot, replace=False)
    offsets = layout_rng.integers(1, k, size=n_rot)
    protos_t = protos.copy()
    for p, off in zip(rotated, offsets):
        protos_t[:, p] = protos[(np.arange(k) + off) % k, p]

    # covariate shift: fixed vocab permutation on a fixed-size position set
    perm = layout_rng.permutation(v).astype(np.int64)
    n_sub = int(round(spec.shift * SUBST_RATE * n))
    sub_mask = np.zeros(n, dtype=bool)
    sub_mask[layout_rng.choice(n, size=n_sub, replace=False)] = True
    remap = (perm, sub_mask)

    src_rng = np.random.default_rng([_SOURCE_STREAM, spec.seed])
    src_labels = _balanced_labels(spec.n_source, k, src_rng)
    src_tokens = _sample_tokens(protos, src_labels, v, src_rng, None)

    tgt_rng = np.random.default_rng([_TARGET_STREAM, spec.seed])
    tgt_labels = _balanced_labels(spec.n_target, k, tgt_rng)
    tgt_tokens = _sample_tokens(protos_t, tgt_labels, v, tgt_rng, remap)

    eval_rng = np.random.default_rng([_EVAL_STREAM, spec.seed])
    eval_labels = _balanced_labels(spec.n_eval, k, eval_rng)
    eval_tokens = _sample_tokens(protos_t, eval_labels, v, eval_rng, remap)

    return DomainData(
        spec=spec,
        source=LabeledSplit(src_tokens, src_labels),
        # training-side target labels are discarded here, by construction
        target_train=UnlabeledSplit(tgt_tokens),
        target_eval=LabeledSplit(eval_tokens, eval_labels),
    )


# ---------------------------------------------------------------------------
# Batching
# ---------------------------------------------------------------------------

def batch_iter(split, batch_size: int, seed) -> Iterator[TokenBatch]:
    """One epoch of shuffled batches; a trailing partial batch is dropped.

    ``seed`` may be an int or a sequence of ints (stream id + counters).
    Same seed, same split: identical batch order.
    """
    n = len(split)
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    if batch_size > n:
        raise ValueError(f"batch_size {batch_size} exceeds split size {n}")
    entropy = [int(seed)] if np.isscalar(seed) else [int(s) for s in seed]
    order = np.random.default_rng(entropy).permutation(n)
    labeled = isinstance(split, LabeledSplit)
    for start in range(0, n - batch_size + 1, batch_size):
        idx = order[start:start + batch_size]
        yield TokenBatch(split.tokens[idx],
                         split.labels[idx] if labeled else None)


def endless_batches(split, batch_size: int, seed: int) -> Iterator[TokenBatch]:
    """Cycle epochs forever, reshuffling with a fresh sub-seed per epoch."""
    epoch = 0
    while True:
        yield from batch_iter(split, batch_size, (int(seed), epoch))
        epoch += 1


# ---------------------------------------------------------------------------
# CSV input/output
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CsvSchema:
    seq_len: int
    labeled: bool
    batch_size: int = 64


def save_csv(path, tokens: np.ndarray, labels: np.ndarray | None = None,
             header: bool = True) -> None:
    """Write one row per example: token columns, then the label column last."""
    path = Path(path)
    seq = tokens.shape[1]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        if header:
            cols = [f"t{i}" for i in range(seq)]
            if labels is not None:
                cols.append("label")
            writer.writerow(cols)
        for i in range(tokens.shape[0]):
            row = [int(x) for x in tokens[i]]
            if labels is not None:
                row.append(int(labels[i]))
            writer.writerow(row)


def load_csv(path, schema: CsvSchema) -> Iterator[TokenBatch]:
    """Stream batches from a CSV file of integer rows.

    Expects ``seq_len`` token columns, plus a trailing label column when the
    schema says the file is labeled. An optional header row is recognized by
    its non-integer cells. The final batch may be smaller than
    ``schema.batch_size``; ingestion never drops rows.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"csv file not found: {path}")
    expected_cols = schema.seq_len + (1 if schema.labeled else 0)
    tok_rows: list[list[int]] = []
    lab_rows: list[int] = []

    def flush() -> TokenBatch:
        tokens = np.array(tok_rows, dtype=np.int64).reshape(len(tok_rows), schema.seq_len)
        labels = np.array(lab_rows, dtype=np.int64) if schema.labeled else None
        tok_rows.clear()
        lab_rows.clear()
        return TokenBatch(tokens, labels)

    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                values = [int(cell) for cell in row]
            except ValueError:
                if line_no == 1:
                    continue  # header row
                raise CsvFormatError(
                    f"{path}: line {line_no}: non-integer cell in {row!r}") from None
            if len(values) != expected_cols:
                raise CsvFormatError(
                    f"{path}: line {line_no}: expected {expected_cols} columns, "
                    f"got {len(values)}")
            if schema.labeled:
                tok_rows.append(values[:-1])
                lab_rows.append(values[-1])
            else:
                tok_rows.append(values)
            if len(tok_rows) == schema.batch_size:
                yield flush()
    if tok_rows:
        yield flush()


# ---------------------------------------------------------------------------
# Dataset directory layout
# ---------------------------------------------------------------------------

_SPEC_FILE = "spec.json"
_FILES = {
    "source": ("source.csv", True),
    "target_train": ("target_train.csv", False),
    "target_eval": ("target_eval.csv", True),
}


def save_dataset(directory, data: DomainData) -> None:
    """Write spec.json plus the three split CSVs into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    spec_json = json.dumps(dataclasses.asdict(data.spec), sort_keys=True, indent=2)
    (directory / _SPEC_FILE).write_text(spec_json + "\n")
    save_csv(directory / _FILES["source"][0], data.source.tokens, data.source.labels)
    save_csv(directory / _FILES["target_train"][0], data.target_train.tokens, None)
    save_csv(directory / _FILES["target_eval"][0], data.target_eval.tokens,
             data.target_eval.labels)


def load_dataset(directory) -> DomainData:
    """Read a dataset directory written by ``save_dataset``."""
    directory = Path(directory)
    spec_path = directory / _SPEC_FILE
    if not spec_path.is_file():
        raise DataError(f"dataset spec not found: {spec_path}")
    try:
        raw = json.loads(spec_path.read_text())
        spec = DomainDatasetSpec(**raw)
    except (json.JSONDecodeError, TypeError) as exc:
        raise DataError(f"{spec_path}: invalid dataset spec: {exc}") from None
    spec.validate()

    def read_split(key: str):
        name, labeled = _FILES[key]
        schema = CsvSchema(seq_len=spec.seq_len, labeled=labeled, batch_size=4096)
        toks, labs = [], []
        for batch in load_csv(directory / name, schema):
            toks.append(batch.tokens)
            if labeled:
                labs.append(batch.labels)
        if not toks:
            raise DataError(f"{directory / name}: split is empty")
        tokens = np.concatenate(toks)
        if tokens.size and (tokens.min() < 0 or tokens.max() >= spec.vocab_size):
            raise DataError(f"{directory / name}: token id outside [0, {spec.vocab_size})")
        if labeled:
            labels = np.concatenate(labs)
            if labels.size and (labels.min() < 0 or labels.max() >= spec.n_classes):
                raise DataError(f"{directory / name}: label outside [0, {spec.n_classes})")
            return LabeledSplit(tokens, labels)
        return UnlabeledSplit(tokens)

    return DomainData(
        spec=spec,
        source=read_split("source"),
        target_train=read_split("target_train"),
        target_eval=read_split("target_eval"),
    )
