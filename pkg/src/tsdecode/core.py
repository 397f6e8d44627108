"""Shared domain types and the on-disk task/result schema.

Token ids are plain non-negative integers. Content sequences (source,
prefix, suffix, span, target) never contain BOS or EOS; models prepend
BOS and decoders handle EOS, so lengths always count content tokens only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator


class TsError(Exception):
    """Base class for all library errors."""


class TokenOutOfRange(TsError):
    """A token id is negative or >= the vocabulary size."""


class ReservedTokenInContent(TsError):
    """BOS or EOS appeared inside a content sequence."""


ROLE_SOURCE = "source"
ROLE_TARGET = "target"
ROLE_PREFIX = "prefix"
ROLE_SUFFIX = "suffix"
ROLE_SPAN = "span"
ROLES = (ROLE_SOURCE, ROLE_TARGET, ROLE_PREFIX, ROLE_SUFFIX, ROLE_SPAN)

STOP_PATIENCE = "patience"
STOP_MAX_LEN = "max_len"
STOP_EMPTY_BEAM = "empty_beam"
STOP_REASONS = (STOP_PATIENCE, STOP_MAX_LEN, STOP_EMPTY_BEAM)


@dataclass(frozen=True)
class Vocab:
    """An integer vocabulary with two reserved ids for BOS and EOS."""

    size: int
    bos_id: int = 0
    eos_id: int = 1
    surface: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.size < 3:
            raise ValueError(f"vocab size must be >= 3, got {self.size}")
        if self.bos_id == self.eos_id:
            raise ValueError("bos_id and eos_id must differ")
        for name, tok in (("bos_id", self.bos_id), ("eos_id", self.eos_id)):
            if not 0 <= tok < self.size:
                raise ValueError(f"{name}={tok} outside vocabulary of size {self.size}")
        if self.surface is not None and len(self.surface) != self.size:
            raise ValueError("surface strings must cover every id")

    @property
    def content_ids(self) -> tuple[int, ...]:
        """All ids except BOS and EOS, ascending."""
        return tuple(
            i for i in range(self.size) if i != self.bos_id and i != self.eos_id
        )


@dataclass(frozen=True)
class TokenSeq:
    """An immutable content-token sequence tagged with its role."""

    tokens: tuple[int, ...] = ()
    role: str = ROLE_TARGET

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[int]:
        return iter(self.tokens)

    def __getitem__(self, idx):
        return self.tokens[idx]

    def with_role(self, role: str) -> "TokenSeq":
        return TokenSeq(self.tokens, role)


def cat(*seqs: TokenSeq, role: str = ROLE_TARGET) -> TokenSeq:
    """Concatenate sequences into one sequence with the given role."""
    tokens: tuple[int, ...] = ()
    for s in seqs:
        tokens += s.tokens
    return TokenSeq(tokens, role)


@dataclass(frozen=True)
class TsTask:
    """One suggestion problem: fill the span between a fixed prefix and suffix.

    ``gold_span`` is the reference filling when known; ``gold_full`` is the
    complete reference target. Either may be absent. When both are present
    they must be consistent with the constraints.
    """

    task_id: str
    source: TokenSeq
    prefix: TokenSeq
    suffix: TokenSeq
    gold_span: TokenSeq | None = None
    gold_full: TokenSeq | None = None

    def __post_init__(self) -> None:
        if self.gold_span is not None and self.gold_full is not None:
            expected = self.prefix.tokens + self.gold_span.tokens + self.suffix.tokens
            if self.gold_full.tokens != expected:
                raise ValueError(
                    f"task {self.task_id}: gold_full is not prefix + gold_span + suffix"
                )


@dataclass(frozen=True)
class DecodeStats:
    """Work accounting for one decode."""

    forward_passes: int
    positions_scored: int
    emitted_steps: int
    stop_reason: str
    wall_time_us: int

    def __post_init__(self) -> None:
        if self.stop_reason not in STOP_REASONS:
            raise ValueError(f"unknown stop_reason {self.stop_reason!r}")
        if self.emitted_steps > self.forward_passes:
            raise ValueError("emitted_steps cannot exceed forward_passes")


@dataclass(frozen=True)
class Suggestion:
    """A decoder's answer for one task."""

    span: TokenSeq
    whole_seq_score: float
    stats: DecodeStats

    def __post_init__(self) -> None:
        score = float(self.whole_seq_score)
        if score != score or score in (float("inf"), float("-inf")):
            raise ValueError(f"whole_seq_score must be finite, got {score}")


@dataclass(frozen=True)
class ResultRow:
    """One line of the result file: a decoder's answer plus its statistics."""

    task_id: str
    decoder: str
    span: tuple[int, ...]
    score: float
    forward_passes: int
    positions_scored: int
    emitted_steps: int
    stop_reason: str
    wall_time_us: int
    error: str | None = None


def _check_seq(seq: TokenSeq, vocab: Vocab, what: str) -> None:
    for tok in seq.tokens:
        if tok < 0 or tok >= vocab.size:
            raise TokenOutOfRange(f"{what}: token id {tok} outside vocab of size {vocab.size}")
        if tok == vocab.bos_id or tok == vocab.eos_id:
            raise ReservedTokenInContent(f"{what}: reserved token id {tok} in content sequence")


def validate_task(task: TsTask, vocab: Vocab) -> TsTask:
    """Check every sequence of ``task`` against ``vocab`` and return it unchanged.

    Raises TokenOutOfRange for ids outside the vocabulary and
    ReservedTokenInContent if BOS/EOS appear in any content sequence.
    """
    _check_seq(task.source, vocab, f"task {task.task_id} source")
    _check_seq(task.prefix, vocab, f"task {task.task_id} prefix")
    _check_seq(task.suffix, vocab, f"task {task.task_id} suffix")
    if task.gold_span is not None:
        _check_seq(task.gold_span, vocab, f"task {task.task_id} gold_span")
    if task.gold_full is not None:
        _check_seq(task.gold_full, vocab, f"task {task.task_id} gold_full")
    return task


# ---------------------------------------------------------------------------
# JSONL schema
# ---------------------------------------------------------------------------

def task_to_dict(task: TsTask) -> dict:
    return {
        "task_id": task.task_id,
        "source": list(task.source.tokens),
        "prefix": list(task.prefix.tokens),
        "suffix": list(task.suffix.tokens),
        "gold_span": None if task.gold_span is None else list(task.gold_span.tokens),
        "gold_full": None if task.gold_full is None else list(task.gold_full.tokens),
    }


def task_from_dict(d: dict) -> TsTask:
    def seq(key: str, role: str) -> TokenSeq:
        return TokenSeq(tuple(d[key]), role)

    return TsTask(
        task_id=str(d["task_id"]),
        source=seq("source", ROLE_SOURCE),
        prefix=seq("prefix", ROLE_PREFIX),
        suffix=seq("suffix", ROLE_SUFFIX),
        gold_span=None if d.get("gold_span") is None else seq("gold_span", ROLE_SPAN),
        gold_full=None if d.get("gold_full") is None else seq("gold_full", ROLE_TARGET),
    )


def result_to_dict(row: ResultRow) -> dict:
    d = {
        "task_id": row.task_id,
        "decoder": row.decoder,
        "span": list(row.span),
        "score": row.score,
        "forward_passes": row.forward_passes,
        "positions_scored": row.positions_scored,
        "emitted_steps": row.emitted_steps,
        "stop_reason": row.stop_reason,
        "wall_time_us": row.wall_time_us,
    }
    if row.error is not None:
        d["error"] = row.error
    return d


def result_from_dict(d: dict) -> ResultRow:
    return ResultRow(
        task_id=str(d["task_id"]),
        decoder=str(d["decoder"]),
        span=tuple(d["span"]),
        score=float(d["score"]),
        forward_passes=int(d["forward_passes"]),
        positions_scored=int(d["positions_scored"]),
        emitted_steps=int(d["emitted_steps"]),
        stop_reason=str(d["stop_reason"]),
        wall_time_us=int(d["wall_time_us"]),
        error=d.get("error"),
    )


def _write_jsonl(path: str | Path, dicts: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in dicts:
            fh.write(json.dumps(d, separators=(",", ":")))
            fh.write("\n")


def write_tasks_jsonl(path: str | Path, tasks: Iterable[TsTask]) -> None:
    _write_jsonl(path, (task_to_dict(t) for t in tasks))


def read_tasks_jsonl(path: str | Path) -> list[TsTask]:
    with open(path, "r", encoding="utf-8") as fh:
        return [task_from_dict(json.loads(line)) for line in fh if line.strip()]


def write_results_jsonl(path: str | Path, rows: Iterable[ResultRow]) -> None:
    _write_jsonl(path, (result_to_dict(r) for r in rows))


def read_results_jsonl(path: str | Path) -> list[ResultRow]:
    with open(path, "r", encoding="utf-8") as fh:
        return [result_from_dict(json.loads(line)) for line in fh if line.strip()]
