"""Synthetic dataset generation and the benchmark sweep protocols.

Datasets are generated end to end from a seed: sample a source sequence,
decode a reference target with beam search under the configured model, then
mask a span of the requested length ratio. Constraints come either from the
reference itself (``gold_reference``) or from the output of a perturbed
sibling model (``machine_translation``), which mimics masking a machine
translation whose prefix/suffix may contain errors; in that mode only the
full-sequence reference is kept, so evaluation compares reconstructed
sentences rather than spans.

Task ids embed the nominal mask ratio (``r<ratio>_n<index>``) because the
task schema itself stores no ratio; aggregation parses it back out.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields as dc_fields, replace

from .core import (
    ROLE_PREFIX,
    ROLE_SOURCE,
    ROLE_SPAN,
    ROLE_SUFFIX,
    ROLE_TARGET,
    ResultRow,
    Suggestion,
    TokenSeq,
    TsError,
    TsTask,
)
from .decode import PsgdParams, beam_search, dba_suggest, default_max_span_len, psgd
from .lm import SequenceModel, make_perturbed_sibling, model_from_spec
from .metrics import BenchRow, EvalRecord, aggregate
from .rng import Stream, hash_key

CONSTRAINT_GOLD = "gold_reference"
CONSTRAINT_MT = "machine_translation"

_GEN_BEAM_WIDTH = 5
_MT_PERTURB_RATE = 0.3
_TASK_ID_RE = re.compile(r"^r(\d+\.\d+)_n(\d+)$")


class DegenerateTarget(TsError):
    """Could not generate a usable reference sequence after many retries."""


@dataclass(frozen=True)
class GenConfig:
    vocab_size: int = 20
    n_tasks: int = 50
    source_len_range: tuple[int, int] = (6, 12)
    seed: int = 0
    model_spec: dict | None = None
    mask_ratio_list: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    constraint_source: str = CONSTRAINT_GOLD

    def __post_init__(self) -> None:
        lo, hi = self.source_len_range
        if lo < 1 or hi < lo:
            raise ValueError(f"bad source_len_range {self.source_len_range}")
        if self.n_tasks < 1:
            raise ValueError("n_tasks must be >= 1")
        if not self.mask_ratio_list:
            raise ValueError("mask_ratio_list must be non-empty")
        for ratio in self.mask_ratio_list:
            if not 0.0 < ratio < 1.0:
                raise ValueError(f"mask_ratio {ratio} outside (0, 1)")
        if self.constraint_source not in (CONSTRAINT_GOLD, CONSTRAINT_MT):
            raise ValueError(f"unknown constraint_source {self.constraint_source!r}")

    def resolved_model_spec(self) -> dict:
        if self.model_spec is not None:
            return dict(self.model_spec)
        return {
            "kind": "ngram_gen",
            "vocab_size": self.vocab_size,
            "order": 2,
            "seed": self.seed,
            "concentration": 0.3,
            "table": None,
        }


@dataclass(frozen=True)
class SweepConfig:
    decoders: tuple[str, ...] = ("psgd", "dba")
    pt_values: tuple[int, ...] = (5,)
    beam_width: int = 5
    repetitions: int = 1
    output_path: str = "metrics.csv"

    def __post_init__(self) -> None:
        if not self.decoders:
            raise ValueError("at least one decoder required")
        for name in self.decoders:
            if name not in ("psgd", "dba"):
                raise ValueError(f"unknown decoder {name!r}")
        if not self.pt_values:
            raise ValueError("at least one pt value required")
        if self.beam_width < 1 or self.repetitions < 1:
            raise ValueError("beam_width and repetitions must be >= 1")


def _config_from_dict(cls, d: dict):
    known = {f.name for f in dc_fields(cls)}
    kwargs = {}
    for key, value in d.items():
        if key not in known:
            continue
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def gen_config_from_dict(d: dict) -> GenConfig:
    return _config_from_dict(GenConfig, d)


def sweep_config_from_dict(d: dict) -> SweepConfig:
    return _config_from_dict(SweepConfig, d)


def make_task_id(ratio: float, index: int) -> str:
    return f"r{ratio:.2f}_n{index:04d}"


def parse_task_ratio(task: TsTask) -> float:
    """Nominal mask ratio from the task id, falling back to the empirical
    span/reference length ratio when the id does not carry one."""
    m = _TASK_ID_RE.match(task.task_id)
    if m:
        return float(m.group(1))
    if task.gold_span is not None and task.gold_full is not None and len(task.gold_full) > 0:
        return round(len(task.gold_span) / len(task.gold_full), 2)
    return 0.0


def _sample_reference(
    model: SequenceModel, stream: Stream, lo: int, hi: int
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Sample a source and decode a reference of length >= 2 for it."""
    content = model.vocab.content_ids
    for _ in range(100):
        src_len = stream.randint(lo, hi)
        source = tuple(stream.choice(content) for _ in range(src_len))
        ref = beam_search(
            model,
            source,
            _GEN_BEAM_WIDTH,
            max_len=default_max_span_len(src_len),
            length_norm=True,
        ).tokens.tokens
        if len(ref) >= 2:
            return source, ref
    raise DegenerateTarget("no reference of length >= 2 after 100 retries")


def _mask(sequence: tuple[int, ...], ratio: float, stream: Stream) -> tuple[int, int]:
    """Span (start, length) for masking ``sequence`` at ``ratio``."""
    span_len = round(ratio * len(sequence))
    span_len = max(1, min(span_len, len(sequence)))
    start = stream.randint(0, len(sequence) - span_len)
    return start, span_len


def gen_dataset(cfg: GenConfig) -> list[TsTask]:
    """Generate ``cfg.n_tasks`` tasks per mask ratio, deterministically."""
    model = model_from_spec(cfg.resolved_model_spec())
    mt_model = None
    if cfg.constraint_source == CONSTRAINT_MT:
        mt_model = make_perturbed_sibling(
            model, perturb_seed=hash_key(cfg.seed, 0x6D74), rate=_MT_PERTURB_RATE
        )
    lo, hi = cfg.source_len_range
    tasks = []
    for ratio in cfg.mask_ratio_list:
        ratio_key = int(round(ratio * 1000))
        for i in range(cfg.n_tasks):
            stream = Stream(hash_key(cfg.seed, 0x7461736B, ratio_key, i))
            source, ref = _sample_reference(model, stream, lo, hi)
            if cfg.constraint_source == CONSTRAINT_GOLD:
                start, span_len = _mask(ref, ratio, stream)
                task = TsTask(
                    task_id=make_task_id(ratio, i),
                    source=TokenSeq(source, ROLE_SOURCE),
                    prefix=TokenSeq(ref[:start], ROLE_PREFIX),
                    suffix=TokenSeq(ref[start + span_len :], ROLE_SUFFIX),
                    gold_span=TokenSeq(ref[start : start + span_len], ROLE_SPAN),
                    gold_full=TokenSeq(ref, ROLE_TARGET),
                )
            else:
                mt_ref = beam_search(
                    mt_model,
                    source,
                    _GEN_BEAM_WIDTH,
                    max_len=default_max_span_len(len(source)),
                    length_norm=True,
                ).tokens.tokens
                if len(mt_ref) < 1:
                    mt_ref = ref
                start, span_len = _mask(mt_ref, ratio, stream)
                task = TsTask(
                    task_id=make_task_id(ratio, i),
                    source=TokenSeq(source, ROLE_SOURCE),
                    prefix=TokenSeq(mt_ref[:start], ROLE_PREFIX),
                    suffix=TokenSeq(mt_ref[start + span_len :], ROLE_SUFFIX),
                    gold_span=None,
                    gold_full=TokenSeq(ref, ROLE_TARGET),
                )
            tasks.append(task)
    return tasks


def split_by_ratio(tasks: list[TsTask]) -> dict[float, list[TsTask]]:
    out: dict[float, list[TsTask]] = {}
    for task in tasks:
        out.setdefault(parse_task_ratio(task), []).append(task)
    return dict(sorted(out.items()))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def decode_task(
    model: SequenceModel,
    task: TsTask,
    decoder: str,
    psgd_params: PsgdParams,
) -> Suggestion:
    if decoder == "psgd":
        return psgd(model, task, psgd_params)
    if decoder == "dba":
        return dba_suggest(
            model,
            task,
            beam_width=psgd_params.beam_width,
            scoring=psgd_params.scoring,
            include_eos_in_len=psgd_params.include_eos_in_len,
        )
    raise ValueError(f"unknown decoder {decoder!r}")


def _run_tasks(fn, tasks, concurrency: int):
    if concurrency <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        return list(pool.map(fn, tasks))


def _result_row(task: TsTask, decoder: str, suggestion: Suggestion) -> ResultRow:
    return ResultRow(
        task_id=task.task_id,
        decoder=decoder,
        span=suggestion.span.tokens,
        score=suggestion.whole_seq_score,
        forward_passes=suggestion.stats.forward_passes,
        positions_scored=suggestion.stats.positions_scored,
        emitted_steps=suggestion.stats.emitted_steps,
        stop_reason=suggestion.stats.stop_reason,
        wall_time_us=suggestion.stats.wall_time_us,
    )


def resolve_pair(task: TsTask, span: tuple[int, ...]) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    """The (candidate, reference) pair to score for a task: the span against
    the gold span when one exists, otherwise the reconstructed sentence
    against the full reference."""
    if task.gold_span is not None:
        return span, task.gold_span.tokens
    if task.gold_full is not None:
        candidate = task.prefix.tokens + span + task.suffix.tokens
        return candidate, task.gold_full.tokens
    return None


def _sweep_point(
    model: SequenceModel,
    tasks: list[TsTask],
    decoder_label: str,
    decoder: str,
    params: PsgdParams,
    repetitions: int,
    concurrency: int,
) -> tuple[list[EvalRecord], list[ResultRow]]:
    def one(task: TsTask) -> tuple[EvalRecord | None, ResultRow]:
        try:
            suggestion = decode_task(model, task, decoder, params)
            wall = suggestion.stats.wall_time_us
            for _ in range(repetitions - 1):
                again = decode_task(model, task, decoder, params)
                wall += again.stats.wall_time_us
            wall = wall // repetitions
            row = replace(_result_row(task, decoder_label, suggestion), wall_time_us=wall)
        except TsError as exc:
            row = ResultRow(
                task_id=task.task_id,
                decoder=decoder_label,
                span=(),
                score=0.0,
                forward_passes=0,
                positions_scored=0,
                emitted_steps=0,
                stop_reason="max_len",
                wall_time_us=0,
                error=type(exc).__name__,
            )
            return None, row
        pair = resolve_pair(task, suggestion.span.tokens)
        if pair is None:
            return None, row
        record = EvalRecord(
            decoder=decoder_label,
            mask_ratio=parse_task_ratio(task),
            candidate=pair[0],
            reference=pair[1],
            forward_passes=row.forward_passes,
            emitted_steps=row.emitted_steps,
            wall_time_us=row.wall_time_us,
        )
        return record, row

    outcomes = _run_tasks(one, tasks, concurrency)
    records = [rec for rec, _ in outcomes if rec is not None]
    rows = [row for _, row in outcomes]
    return records, rows


def run_pt_sweep(
    dataset: list[TsTask],
    model: SequenceModel,
    pt_values,
    beam_width: int,
    repetitions: int = 1,
    concurrency: int = 1,
) -> tuple[list[BenchRow], list[ResultRow]]:
    """Decode the dataset at each early-stopping patience value."""
    for task in dataset:
        if task.gold_span is None:
            raise TsError(f"pt sweep needs gold spans; task {task.task_id} has none")
    records: list[EvalRecord] = []
    rows: list[ResultRow] = []
    for pt in pt_values:
        params = PsgdParams(beam_width=beam_width, patience=int(pt))
        recs, rws = _sweep_point(
            model, dataset, f"psgd_pt{pt}", "psgd", params, repetitions, concurrency
        )
        records.extend(recs)
        rows.extend(rws)
    return aggregate(records), rows


def run_ratio_sweep(
    datasets_by_ratio: dict[float, list[TsTask]],
    model: SequenceModel,
    decoders,
    params: PsgdParams,
    repetitions: int = 1,
    concurrency: int = 1,
) -> tuple[list[BenchRow], list[ResultRow]]:
    """Decode every per-ratio dataset with every decoder."""
    records: list[EvalRecord] = []
    rows: list[ResultRow] = []
    for ratio in sorted(datasets_by_ratio):
        tasks = datasets_by_ratio[ratio]
        for decoder in decoders:
            recs, rws = _sweep_point(
                model, tasks, decoder, decoder, params, repetitions, concurrency
            )
            records.extend(recs)
            rows.extend(rws)
    return aggregate(records), rows
