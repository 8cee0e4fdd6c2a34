"""Command-line interface.

Commands: gen-data, train-teacher, train-kd, train-clda, analyze-lsr,
analyze-cka, analyze-pvr, report. Training commands accept a comma list of
seeds and can fan seeds out over processes with --jobs.

Exit codes: 0 success, 2 configuration error, 3 data error (missing or
malformed inputs), 4 training divergence.

Every JSON artifact is validated against the schema shipped in
``clda/schemas`` before it is written; metrics logs are JSON-lines with a
header line (version, seed, config snapshot) followed by one record per
eval interval.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .analysis import cross_model_cka, layer_saliency, pvr_report, split_eval_batches
from .checkpoint import CheckpointError, load_model, save_model
from .svg import CurveGroup, bars_svg, curves_svg, heatmap_svg
from .tensor_core import ShapeError
from .trainer import (
    CldaConfig, ConfigError, DivergenceError, TeacherConfig, _check_compat,
    run_clda, train_teacher_baseline,
)
from .uda_data import (
    DataError, DomainDatasetSpec, TokenBatch, gen_synthetic_domains,
    load_dataset, save_dataset,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

_PALETTE = ("#38598c", "#46967f", "#c2572f", "#8455a8", "#b3a125")


# ---------------------------------------------------------------------------
# Schemas
# ---------------------------------------------------------------------------

def _schema(name: str) -> dict:
    text = resources.files("clda").joinpath(f"schemas/{name}.json").read_text()
    return json.loads(text)


def validate_json(obj, schema_name: str) -> None:
    jsonschema.validate(obj, _schema(schema_name))


def _write_json(path: Path, obj, schema_name: str) -> None:
    validate_json(obj, schema_name)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def _write_metrics(path: Path, seed: int, config: dict, records: list[dict],
                   record_schema: str) -> None:
    header = {"version": __version__, "seed": int(seed), "config": config}
    validate_json(header, "metrics_header")
    lines = [json.dumps(header, sort_keys=True)]
    for rec in records:
        validate_json(rec, record_schema)
        lines.append(json.dumps(rec, sort_keys=True))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Config assembly
# ---------------------------------------------------------------------------

def _coerce(key: str, default, value):
    bad = ConfigError(f"config key {key!r}: expected "
                      f"{type(default).__name__}, got {value!r}")
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise bad
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise bad
        return value
    return value


def _build_config(cls, config_path: str | None, overrides: dict):
    """Defaults, then JSON config file, then non-None CLI flags."""
    defaults = dataclasses.asdict(cls())
    merged = dict(defaults)
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise ConfigError(f"{path}: unknown config keys: {', '.join(unknown)}")
        for k, v in loaded.items():
            merged[k] = _coerce(k, defaults[k], v)
    for k, v in overrides.items():
        if v is not None:
            merged[k] = _coerce(k, defaults[k], v)
    cfg = cls(**merged)
    try:
        cfg.validate()
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--seeds must be a comma list of integers, got {text!r}") from None
    if not seeds:
        raise ConfigError("--seeds is empty")
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"--seeds contains duplicates: {text!r}")
    return seeds


def _run_seeded(worker, payloads: list[dict], jobs: int) -> list[str]:
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(worker, payloads))
    return [worker(p) for p in payloads]


# ---------------------------------------------------------------------------
# Seed workers (top level so they pickle for --jobs)
# ---------------------------------------------------------------------------

def _train_teacher_worker(payload: dict) -> str:
    cfg = TeacherConfig(**payload["config"])
    data = load_dataset(payload["data_dir"])
    result = train_teacher_baseline(cfg, data)
    out = Path(payload["out_dir"])
    ckpt = out / f"teacher-seed{cfg.seed}.ckpt"
    save_model(ckpt, result.model)
    _write_metrics(out / f"teacher-seed{cfg.seed}.metrics.jsonl", cfg.seed,
                   dataclasses.asdict(cfg), result.metrics, "teacher_metrics_record")
    last = result.metrics[-1]
    return (f"seed {cfg.seed}: source_acc={last['source_acc']:.4f} "
            f"target_acc={last['target_acc']:.4f} -> {ckpt}")


def _train_clda_worker(payload: dict) -> str:
    cfg = CldaConfig(**payload["config"])
    data = load_dataset(payload["data_dir"])
    teacher = load_model(payload["teacher"])
    result = run_clda(cfg, teacher, data)
    out = Path(payload["out_dir"])
    student_ckpt = out / f"student-seed{cfg.seed}.ckpt"
    save_model(student_ckpt, result.student)
    if payload["save_teacher"]:
        save_model(out / f"teacher-updated-seed{cfg.seed}.ckpt", result.teacher)
    _write_metrics(out / f"metrics-seed{cfg.seed}.jsonl", cfg.seed,
                   dataclasses.asdict(cfg), result.metrics, "metrics_record")
    last = result.metrics[-1]
    return (f"seed {cfg.seed}: student_target_acc={last['student_target_acc']:.4f} "
            f"teacher_target_acc={last['teacher_target_acc']:.4f} -> {student_ckpt}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    overrides = {
        "seed": args.seed, "shift": args.shift, "vocab_size": args.vocab_size,
        "seq_len": args.seq_len, "n_classes": args.n_classes,
        "n_source": args.n_source, "n_target": args.n_target,
        "n_eval": args.n_eval,
    }
    spec = _build_config(DomainDatasetSpec, args.config, overrides)
    data = gen_synthetic_domains(spec)
    save_dataset(args.out, data)
    print(f"wrote dataset to {args.out} (source={len(data.source)}, "
          f"target_train={len(data.target_train)}, "
          f"target_eval={len(data.target_eval)}, shift={spec.shift})")
    return EXIT_OK


def cmd_train_teacher(args) -> int:
    overrides = {
        "total_steps": args.steps, "lr": args.lr, "conf_threshold": args.tau,
        "batch_size": args.batch_size, "depth": args.depth,
        "width": args.width, "mlp_width": args.mlp_width,
        "self_training": args.self_train, "warmup_steps": args.warmup_steps,
        "optimizer": args.optimizer, "eval_every": args.eval_every,
    }
    base = _build_config(TeacherConfig, args.config, overrides)
    seeds = _parse_seeds(args.seeds)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    payloads = [{
        "config": {**dataclasses.asdict(base), "seed": s},
        "data_dir": args.data,
        "out_dir": args.out,
    } for s in seeds]
    for line in _run_seeded(_train_teacher_worker, payloads, args.jobs):
        print(line)
    return EXIT_OK


def _run_clda_command(args, force_mapping_none: bool, save_teacher: bool) -> int:
    overrides = {
        "total_steps": args.steps, "lr": args.lr, "conf_threshold": args.tau,
        "batch_size": args.batch_size, "student_depth": args.student_depth,
        "optimizer": args.optimizer, "eval_every": args.eval_every,
        "t2": getattr(args, "t2", None), "t3": getattr(args, "t3", None),
        "ema_alpha": getattr(args, "alpha", None),
        "lsr_threshold": getattr(args, "lsr_threshold", None),
        "select_fraction": getattr(args, "select_fraction", None),
        "mapping": getattr(args, "mapping", None),
        "lsr_mode": getattr(args, "lsr_mode", None),
    }
    if force_mapping_none:
        # must happen before validation: schedule bounds do not apply here
        overrides["mapping"] = "none"
    base = _build_config(CldaConfig, args.config, overrides)
    seeds = _parse_seeds(args.seeds)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    payloads = [{
        "config": {**dataclasses.asdict(base), "seed": s},
        "data_dir": args.data,
        "teacher": args.teacher,
        "out_dir": args.out,
        "save_teacher": save_teacher,
    } for s in seeds]
    for line in _run_seeded(_train_clda_worker, payloads, args.jobs):
        print(line)
    return EXIT_OK


def cmd_train_kd(args) -> int:
    return _run_clda_command(args, force_mapping_none=True, save_teacher=False)


def cmd_train_clda(args) -> int:
    return _run_clda_command(args, force_mapping_none=False, save_teacher=True)


def _eval_split(data, name: str):
    split = {"target_eval": data.target_eval, "target_train": data.target_train,
             "source": data.source}[name]
    return split


def _token_batches(split, batch_size: int, limit: int) -> list[TokenBatch]:
    tokens = split.tokens[:limit]
    if tokens.shape[0] == 0:
        raise DataError("split has no examples")
    return [TokenBatch(tokens[i:i + batch_size])
            for i in range(0, tokens.shape[0], batch_size)]


def cmd_analyze_lsr(args) -> int:
    model = load_model(args.ckpt)
    data = load_dataset(args.data)
    _check_compat(model.config, data.spec)
    split = _eval_split(data, args.split)
    batches = split_eval_batches(split, args.batch_size, limit=args.limit)
    report = layer_saliency(model, batches, args.threshold)
    out = Path(args.out)
    _write_json(out, report.to_json(), "lsr_report")
    classes = report.to_json()
    print(f"baseline accuracy {report.baseline_accuracy:.4f}; "
          f"salient layers {classes['salient']}, "
          f"non-salient {classes['non_salient']} -> {out}")
    return EXIT_OK


def cmd_analyze_cka(args) -> int:
    model_a = load_model(args.ckpt_a)
    model_b = load_model(args.ckpt_b)
    data = load_dataset(args.data)
    _check_compat(model_a.config, data.spec)
    _check_compat(model_b.config, data.spec)
    batches = _token_batches(_eval_split(data, args.split), args.batch_size,
                             args.limit)
    heat = cross_model_cka(model_a, model_b, batches)
    json_path = Path(str(args.out) + ".json")
    svg_path = Path(str(args.out) + ".svg")
    _write_json(json_path, heat.to_json(), "cka_report")
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    svg_path.write_text(heatmap_svg(
        heat.values, heat.row_labels, heat.col_labels,
        title="linear CKA (rows: model A, cols: model B)", vmin=0.0, vmax=1.0))
    print(f"wrote {json_path} and {svg_path}")
    return EXIT_OK


def cmd_analyze_pvr(args) -> int:
    model_a = load_model(args.ckpt_a)
    model_b = load_model(args.ckpt_b)
    report = pvr_report(model_a, model_b)
    grid, layer_labels, modules = report.as_grid()
    json_path = Path(str(args.out) + ".json")
    svg_path = Path(str(args.out) + ".svg")
    _write_json(json_path, report.to_json(), "pvr_report")
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    svg_path.write_text(bars_svg(
        layer_labels,
        {m: grid[:, j] for j, m in enumerate(modules)},
        title="mean absolute parameter difference per layer"))
    print(f"wrote {json_path} and {svg_path}")
    return EXIT_OK


def _read_metrics_log(path: Path) -> tuple[dict, list[dict]]:
    if not path.is_file():
        raise DataError(f"metrics log not found: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise DataError(f"{path}: need a header line plus at least one record")
    parsed = []
    for i, ln in enumerate(lines, start=1):
        try:
            parsed.append(json.loads(ln))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: line {i}: invalid JSON: {exc}") from None
    header, records = parsed[0], parsed[1:]
    try:
        validate_json(header, "metrics_header")
        schema = ("metrics_record" if "teacher_target_acc" in records[0]
                  else "teacher_metrics_record")
        for rec in records:
            validate_json(rec, schema)
    except jsonschema.ValidationError as exc:
        raise DataError(f"{path}: schema violation: {exc.message}") from None
    return header, records


def cmd_report(args) -> int:
    runs = [_read_metrics_log(Path(p)) for p in args.logs]
    headers = [h for h, _ in runs]
    all_records = [r for _, r in runs]
    steps = [rec["step"] for rec in all_records[0]]
    if len(steps) < 2:
        raise DataError("report: need at least two eval records per log")
    for path, recs in zip(args.logs, all_records):
        if [rec["step"] for rec in recs] != steps:
            raise DataError(f"report: eval cadence of {path} does not match "
                            f"{args.logs[0]}")
    metric_keys = [k for k, v in all_records[0][0].items()
                   if k not in ("step", "stage")
                   and isinstance(v, (int, float)) and not isinstance(v, bool)]
    series = {k: [[float(rec[k]) for rec in recs] for recs in all_records]
              for k in metric_keys}
    aggregate = {}
    for k, rows in series.items():
        mat = np.asarray(rows)
        aggregate[k] = {"mean": [float(v) for v in mat.mean(axis=0)],
                        "std": [float(v) for v in mat.std(axis=0)]}
    obj = {
        "version": __version__,
        "seeds": [int(h["seed"]) for h in headers],
        "config": headers[0]["config"],
        "steps": [int(s) for s in steps],
        "series": series,
        "aggregate": aggregate,
    }
    json_path = Path(str(args.out) + ".json")
    svg_path = Path(str(args.out) + ".svg")
    _write_json(json_path, obj, "experiment_report")
    curve_keys = [k for k in metric_keys if k.endswith("_acc") or k == "mean_q"]
    groups = [CurveGroup(label=k, color=_PALETTE[i % len(_PALETTE)],
                         series=series[k])
              for i, k in enumerate(curve_keys)]
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    svg_path.write_text(curves_svg(
        steps, groups,
        title=f"metrics across {len(headers)} seed(s)", y_label="value"))
    print(f"wrote {json_path} and {svg_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="JSON file of config fields")
    p.add_argument("--seeds", default="0", help="comma list of seeds")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel worker processes across seeds")
    p.add_argument("--steps", type=int, default=None, dest="steps")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--tau", type=float, default=None,
                   help="pseudo-label confidence threshold")
    p.add_argument("--batch-size", type=int, default=None, dest="batch_size")
    p.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
    p.add_argument("--eval-every", type=int, default=None, dest="eval_every")


def _add_clda_flags(p: argparse.ArgumentParser, with_mapping: bool) -> None:
    p.add_argument("--data", required=True, help="dataset directory from gen-data")
    p.add_argument("--teacher", required=True, help="teacher checkpoint path")
    p.add_argument("--out", required=True, help="output directory")
    _add_common_train_flags(p)
    p.add_argument("--student-depth", type=int, default=None, dest="student_depth")
    if with_mapping:
        p.add_argument("--t2", type=int, default=None,
                       help="step at which layers are scored and selected")
        p.add_argument("--t3", type=int, default=None,
                       help="step at which the layer mapping is fixed")
        p.add_argument("--alpha", type=float, default=None,
                       help="EMA retention factor for teacher updates")
        p.add_argument("--lsr-threshold", type=float, default=None,
                       dest="lsr_threshold")
        p.add_argument("--select-fraction", type=float, default=None,
                       dest="select_fraction")
        p.add_argument("--mapping", choices=("channel", "token", "both",
                                             "random", "none"), default=None)
        p.add_argument("--lsr-mode", choices=("oracle", "proxy"), default=None,
                       dest="lsr_mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clda",
        description="collaborative teacher-student domain adaptation toolkit")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    g = sub.add_parser("gen-data", help="generate a synthetic dataset directory")
    g.add_argument("--out", required=True)
    g.add_argument("--config", default=None)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--shift", type=float, default=None)
    g.add_argument("--vocab-size", type=int, default=None, dest="vocab_size")
    g.add_argument("--seq-len", type=int, default=None, dest="seq_len")
    g.add_argument("--n-classes", type=int, default=None, dest="n_classes")
    g.add_argument("--n-source", type=int, default=None, dest="n_source")
    g.add_argument("--n-target", type=int, default=None, dest="n_target")
    g.add_argument("--n-eval", type=int, default=None, dest="n_eval")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train-teacher",
                       help="train a teacher (or source-only) baseline")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    _add_common_train_flags(t)
    t.add_argument("--depth", type=int, default=None)
    t.add_argument("--width", type=int, default=None)
    t.add_argument("--mlp-width", type=int, default=None, dest="mlp_width")
    t.add_argument("--self-train", action=argparse.BooleanOptionalAction,
                   default=None, dest="self_train",
                   help="include confidence-gated self-training on target")
    t.add_argument("--warmup", type=int, default=None, dest="warmup_steps",
                   help="source-only steps before self-training starts")
    t.set_defaults(func=cmd_train_teacher)

    k = sub.add_parser("train-kd", help="distillation-only student baseline")
    _add_clda_flags(k, with_mapping=False)
    k.set_defaults(func=cmd_train_kd)

    c = sub.add_parser("train-clda", help="collaborative three-stage run")
    _add_clda_flags(c, with_mapping=True)
    c.set_defaults(func=cmd_train_clda)

    l = sub.add_parser("analyze-lsr", help="layer saliency report")
    l.add_argument("--ckpt", required=True)
    l.add_argument("--data", required=True)
    l.add_argument("--out", required=True, help="output JSON path")
    l.add_argument("--threshold", type=float, default=0.003)
    l.add_argument("--split", choices=("target_eval", "source"),
                   default="target_eval")
    l.add_argument("--batch-size", type=int, default=64, dest="batch_size")
    l.add_argument("--limit", type=int, default=512)
    l.set_defaults(func=cmd_analyze_lsr)

    a = sub.add_parser("analyze-cka",
                       help="cross-model representation similarity heatmap")
    a.add_argument("--ckpt-a", required=True, dest="ckpt_a")
    a.add_argument("--ckpt-b", required=True, dest="ckpt_b")
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True, help="output path prefix (.json/.svg)")
    a.add_argument("--split", choices=("target_eval", "target_train", "source"),
                   default="target_eval")
    a.add_argument("--batch-size", type=int, default=64, dest="batch_size")
    a.add_argument("--limit", type=int, default=256)
    a.set_defaults(func=cmd_analyze_cka)

    v = sub.add_parser("analyze-pvr",
                       help="per-layer parameter difference between checkpoints")
    v.add_argument("--ckpt-a", required=True, dest="ckpt_a")
    v.add_argument("--ckpt-b", required=True, dest="ckpt_b")
    v.add_argument("--out", required=True, help="output path prefix (.json/.svg)")
    v.set_defaults(func=cmd_analyze_pvr)

    r = sub.add_parser("report", help="aggregate metrics logs across seeds")
    r.add_argument("--logs", required=True, nargs="+",
                   help="metrics .jsonl files, one per seed")
    r.add_argument("--out", required=True, help="output path prefix (.json/.svg)")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ShapeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheckpointError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
