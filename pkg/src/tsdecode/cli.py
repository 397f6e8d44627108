"""Command-line front end: gen, suggest, eval, sweep-pt, sweep-ratio.

Exit codes: 0 success, 1 runtime/I-O error, 2 usage or configuration error.
Flags override config-file values. Per-task decode failures are recorded as
error rows in the output, not process failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .core import (
    ResultRow,
    TsError,
    TsTask,
    read_results_jsonl,
    read_tasks_jsonl,
    write_results_jsonl,
    write_tasks_jsonl,
)
from .decode import PsgdParams
from .harness import (
    GenConfig,
    SweepConfig,
    decode_task,
    gen_config_from_dict,
    gen_dataset,
    parse_task_ratio,
    resolve_pair,
    run_pt_sweep,
    run_ratio_sweep,
    split_by_ratio,
    sweep_config_from_dict,
)
from .lm import load_model_spec, model_from_spec, save_model_spec
from .metrics import EvalRecord, aggregate, write_metrics_csv
from .scoring import SCORING_MODES

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class UnknownTaskId(TsError):
    """A result row references a task id absent from the task file."""


class ConfigError(Exception):
    """Bad configuration or unusable input path."""


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read JSON config {path}: {exc}") from exc


def _require_file(path: str, what: str) -> None:
    if not Path(path).is_file():
        raise ConfigError(f"{what} not found: {path}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v != "")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v != "")


def _gen_config(args) -> GenConfig:
    d = _load_json(args.config) if args.config else {}
    if args.vocab_size is not None:
        d["vocab_size"] = args.vocab_size
    if args.n_tasks is not None:
        d["n_tasks"] = args.n_tasks
    if args.seed is not None:
        d["seed"] = args.seed
    if args.mask_ratios is not None:
        d["mask_ratio_list"] = list(_floats(args.mask_ratios))
    if args.source_len_range is not None:
        d["source_len_range"] = list(_ints(args.source_len_range))
    if args.constraint_source is not None:
        d["constraint_source"] = args.constraint_source
    try:
        return gen_config_from_dict(d)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _psgd_params(args) -> PsgdParams:
    try:
        return PsgdParams(
            beam_width=args.beam_width,
            patience=args.pt,
            max_span_len=args.max_span_len,
            scoring=args.scoring,
            include_eos_in_len=args.include_eos_in_len,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _concurrency(args) -> int:
    if getattr(args, "concurrency", None):
        return max(1, args.concurrency)
    if getattr(args, "timing", False):
        return 1
    return os.cpu_count() or 1


def cmd_gen(args) -> int:
    cfg = _gen_config(args)
    tasks = gen_dataset(cfg)
    write_tasks_jsonl(args.out, tasks)
    if args.model_spec:
        save_model_spec(args.model_spec, model_from_spec(cfg.resolved_model_spec()))
    print(f"wrote {len(tasks)} tasks to {args.out}")
    return EXIT_OK


def cmd_suggest(args) -> int:
    _require_file(args.tasks, "task file")
    _require_file(args.model_spec, "model spec")
    model = load_model_spec(args.model_spec)
    tasks = read_tasks_jsonl(args.tasks)
    params = _psgd_params(args)
    rows: list[ResultRow] = []
    for task in tasks:
        try:
            suggestion = decode_task(model, task, args.decoder, params)
            rows.append(
                ResultRow(
                    task_id=task.task_id,
                    decoder=args.decoder,
                    span=suggestion.span.tokens,
                    score=suggestion.whole_seq_score,
                    forward_passes=suggestion.stats.forward_passes,
                    positions_scored=suggestion.stats.positions_scored,
                    emitted_steps=suggestion.stats.emitted_steps,
                    stop_reason=suggestion.stats.stop_reason,
                    wall_time_us=suggestion.stats.wall_time_us,
                )
            )
        except TsError as exc:
            rows.append(
                ResultRow(
                    task_id=task.task_id,
                    decoder=args.decoder,
                    span=(),
                    score=0.0,
                    forward_passes=0,
                    positions_scored=0,
                    emitted_steps=0,
                    stop_reason="max_len",
                    wall_time_us=0,
                    error=type(exc).__name__,
                )
            )
    write_results_jsonl(args.out, rows)
    print(f"wrote {len(rows)} results to {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    _require_file(args.tasks, "task file")
    _require_file(args.results, "result file")
    tasks = {t.task_id: t for t in read_tasks_jsonl(args.tasks)}
    results = read_results_jsonl(args.results)
    records: list[EvalRecord] = []
    for row in results:
        task = tasks.get(row.task_id)
        if task is None:
            raise UnknownTaskId(f"result references unknown task id {row.task_id!r}")
        if row.error is not None:
            continue
        pair = resolve_pair(task, row.span)
        if pair is None:
            continue
        records.append(
            EvalRecord(
                decoder=row.decoder,
                mask_ratio=parse_task_ratio(task),
                candidate=pair[0],
                reference=pair[1],
                forward_passes=row.forward_passes,
                emitted_steps=row.emitted_steps,
                wall_time_us=row.wall_time_us,
            )
        )
    write_metrics_csv(args.out, aggregate(records))
    print(f"wrote metrics to {args.out}")
    return EXIT_OK


def _sweep_common(args) -> tuple[GenConfig, SweepConfig, list[TsTask]]:
    d = _load_json(args.config)
    try:
        gen_cfg = gen_config_from_dict(d)
        sweep_cfg = sweep_config_from_dict(d)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    tasks = gen_dataset(gen_cfg)
    return gen_cfg, sweep_cfg, tasks


def cmd_sweep_pt(args) -> int:
    gen_cfg, sweep_cfg, tasks = _sweep_common(args)
    model = model_from_spec(gen_cfg.resolved_model_spec())
    bench, rows = run_pt_sweep(
        tasks,
        model,
        sweep_cfg.pt_values,
        sweep_cfg.beam_width,
        repetitions=sweep_cfg.repetitions,
        concurrency=_concurrency(args),
    )
    out = args.out or sweep_cfg.output_path
    write_metrics_csv(out, bench)
    if args.results_out:
        write_results_jsonl(args.results_out, rows)
    print(f"wrote metrics to {out}")
    return EXIT_OK


def cmd_sweep_ratio(args) -> int:
    gen_cfg, sweep_cfg, tasks = _sweep_common(args)
    model = model_from_spec(gen_cfg.resolved_model_spec())
    params = PsgdParams(beam_width=sweep_cfg.beam_width, patience=sweep_cfg.pt_values[0])
    bench, rows = run_ratio_sweep(
        split_by_ratio(tasks),
        model,
        sweep_cfg.decoders,
        params,
        repetitions=sweep_cfg.repetitions,
        concurrency=_concurrency(args),
    )
    out = args.out or sweep_cfg.output_path
    write_metrics_csv(out, bench)
    if args.results_out:
        write_results_jsonl(args.results_out, rows)
    print(f"wrote metrics to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsdecode",
        description="Span-infill decoding benchmark harness on synthetic sequence models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic task file and model spec")
    p_gen.add_argument("--config", help="GenConfig JSON file")
    p_gen.add_argument("--vocab-size", type=int)
    p_gen.add_argument("--n-tasks", type=int)
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--mask-ratios", help="comma-separated ratios in (0,1)")
    p_gen.add_argument("--source-len-range", help="min,max source length")
    p_gen.add_argument("--constraint-source", choices=["gold_reference", "machine_translation"])
    p_gen.add_argument("--out", required=True, help="output task JSONL")
    p_gen.add_argument("--model-spec", help="output model spec JSON")
    p_gen.set_defaults(func=cmd_gen)

    p_sug = sub.add_parser("suggest", help="decode suggestions for a task file")
    p_sug.add_argument("--tasks", required=True)
    p_sug.add_argument("--model-spec", required=True)
    p_sug.add_argument("--decoder", choices=["psgd", "dba"], default="psgd")
    p_sug.add_argument("--beam-width", type=int, default=5)
    p_sug.add_argument("--pt", type=int, default=5, help="early-stopping patience")
    p_sug.add_argument("--max-span-len", type=int, default=None)
    p_sug.add_argument("--scoring", choices=list(SCORING_MODES), default="mean_logprob")
    p_sug.add_argument("--include-eos-in-len", action="store_true")
    p_sug.add_argument("--out", required=True, help="output result JSONL")
    p_sug.set_defaults(func=cmd_suggest)

    p_eval = sub.add_parser("eval", help="score results against gold tasks")
    p_eval.add_argument("--tasks", required=True)
    p_eval.add_argument("--results", required=True)
    p_eval.add_argument("--out", required=True, help="output metrics CSV")
    p_eval.set_defaults(func=cmd_eval)

    for name, fn in (("sweep-pt", cmd_sweep_pt), ("sweep-ratio", cmd_sweep_ratio)):
        p = sub.add_parser(name, help=f"run the {name.replace('-', ' ')} protocol")
        p.add_argument("--config", required=True, help="combined Gen/Sweep config JSON")
        p.add_argument("--out", help="output metrics CSV (overrides config)")
        p.add_argument("--results-out", help="also write per-task result JSONL")
        p.add_argument("--timing", action="store_true", help="stable wall-time mode (concurrency 1)")
        p.add_argument("--concurrency", type=int, default=0)
        p.set_defaults(func=fn)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TsError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
