"""The three decoders: plain beam search, prefix-suffix guided span decoding
(PSGD), and dynamic beam allocation (DBA) for lexically constrained decoding.

PSGD fills the masked span directly: the beam holds span candidates only,
each step runs one forced pass over prefix + span + suffix per beam item,
and that single pass yields both the whole-sequence score (used for the
stopping rule) and the next-token distribution at the span position (used
to extend the beam). Decoding stops once the best whole-sequence score has
not improved for ``patience`` consecutive steps, and the answer is the span
prefix at the best-scoring step.

DBA decodes the whole sentence left to right under hard phrasal
constraints, dividing the beam into banks by constraint progress so that
partially-satisfied hypotheses survive pruning.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import (
    ROLE_SPAN,
    ROLE_TARGET,
    STOP_EMPTY_BEAM,
    STOP_MAX_LEN,
    STOP_PATIENCE,
    DecodeStats,
    Suggestion,
    TokenSeq,
    TsError,
    TsTask,
    validate_task,
)
from .lm import SequenceModel, as_tokens
from .scoring import SCORING_MEAN_LOGPROB, filled_score, normalized_score, prefer

Tokens = tuple[int, ...]


class InvalidParams(TsError):
    """Decoder parameters violate their invariants."""


class ConstraintsUnsatisfiable(TsError):
    """No constraint-complete hypothesis finished within the length budget."""


class MissingGoldSpan(TsError):
    """The operation needs a task with a gold span."""


def default_max_span_len(source_len: int) -> int:
    """Generous span cap preventing runaway decoding loops."""
    return 2 * (source_len + 4)


@dataclass(frozen=True)
class Hypothesis:
    """A partial span candidate: emitted tokens and their cumulative log-prob."""

    span_tokens: Tokens
    span_logprob: float
    alive: bool = True


@dataclass
class BestRecord:
    """Running maximum of the whole-sequence score across steps and beams."""

    best_score: float = float("-inf")
    best_step: int = 0
    best_span: Tokens = ()

    def offer(self, score: float, step: int, span: Tokens) -> None:
        if self.best_score == float("-inf") or prefer(score, span, self.best_score, self.best_span):
            self.best_score = score
            self.best_step = step
            self.best_span = span


@dataclass(frozen=True)
class PsgdParams:
    beam_width: int = 5
    patience: int = 5
    max_span_len: int | None = None
    scoring: str = SCORING_MEAN_LOGPROB
    include_eos_in_len: bool = False


@dataclass(frozen=True)
class DbaParams:
    beam_width: int
    max_len: int
    constraints: tuple[Tokens, ...] = ()


@dataclass(frozen=True)
class BeamSearchResult:
    tokens: TokenSeq
    score: float
    finished: bool


def _wall_us(t0: float) -> int:
    return int((time.perf_counter() - t0) * 1e6)


# ---------------------------------------------------------------------------
# Plain beam search
# ---------------------------------------------------------------------------

def _pick_best(entries, selection_score):
    best_tokens, best_sel = None, float("-inf")
    for tokens, raw in entries:
        sel = selection_score(raw, tokens)
        if best_tokens is None or prefer(sel, tokens, best_sel, best_tokens):
            best_tokens, best_sel = tokens, sel
    return best_tokens, best_sel


def beam_search(
    model: SequenceModel,
    source,
    beam_width: int,
    max_len: int,
    length_norm: bool = False,
) -> BeamSearchResult:
    """Standard beam search from BOS over content tokens.

    A hypothesis finishes (its EOS completion becomes a candidate answer)
    when EOS is its argmax extension or its EOS candidate ranks inside the
    beam selection window. Raw-score pruning is lossless: a hypothesis is
    dropped only when it can no longer finish above the best completion
    already recorded.

    Termination: the length cap; an emptied beam; or, with length
    normalization, once ``beam_width`` EOS candidates have ranked inside
    the beam selection window.

    Returns the best finished sequence under the selected scoring; if
    nothing finished, the best unfinished hypothesis with ``finished=False``.
    """
    if beam_width < 1:
        raise InvalidParams(f"beam_width must be >= 1, got {beam_width}")
    if max_len < 0:
        raise InvalidParams(f"max_len must be >= 0, got {max_len}")
    src = as_tokens(source)
    eos = model.vocab.eos_id
    content = model.vocab.content_ids

    def selection_score(raw: float, tokens: Tokens) -> float:
        return normalized_score(raw, len(tokens)) if length_norm else raw

    beam: list[tuple[Tokens, float]] = [((), 0.0)]
    finished: dict[Tokens, float] = {}
    best_finished_raw = float("-inf")
    hard_finishes = 0

    def record(tokens: Tokens, raw: float) -> None:
        nonlocal best_finished_raw
        if tokens not in finished:
            finished[tokens] = raw
        best_finished_raw = max(best_finished_raw, raw)

    for step in range(max_len + 1):
        candidates = []
        for tokens, lp in beam:
            log_row = model.forced_pass(src, tokens).log_matrix()[-1]
            eos_raw = lp + float(log_row[eos])
            if int(np.argmax(log_row)) == eos:
                record(tokens, eos_raw)
            if step < max_len:
                candidates.append((eos_raw, tokens, True))
                for tok in content:
                    candidates.append((lp + float(log_row[tok]), tokens + (tok,), False))
        if step == max_len:
            break
        candidates.sort(key=lambda c: (-c[0], len(c[1]), c[1]))
        # EOS candidates ranking inside the beam window finish; the alive
        # beam is backfilled with the best content candidates.
        for cand in candidates[:beam_width]:
            if cand[2]:
                record(cand[1], cand[0])
                hard_finishes += 1
        if length_norm and hard_finishes >= beam_width:
            break
        beam = [(tokens, lp) for lp, tokens, is_eos in candidates if not is_eos][:beam_width]
        if not length_norm:
            # Raw scores only decrease, so nothing at or below the best
            # finished raw score can ever finish strictly better.
            beam = [(t, lp) for t, lp in beam if lp > best_finished_raw]
        if not beam:
            break

    if finished:
        best_tokens, best_sel = _pick_best(finished.items(), selection_score)
        return BeamSearchResult(TokenSeq(best_tokens, ROLE_TARGET), best_sel, True)
    best_tokens, best_sel = _pick_best(((t, lp) for t, lp in beam), selection_score)
    return BeamSearchResult(TokenSeq(best_tokens or (), ROLE_TARGET), best_sel, False)


# ---------------------------------------------------------------------------
# PSGD
# ---------------------------------------------------------------------------

def _resolve_psgd_params(params: PsgdParams, source_len: int) -> tuple[int, int, int]:
    if params.beam_width < 1:
        raise InvalidParams(f"beam_width must be >= 1, got {params.beam_width}")
    if params.patience < 0:
        raise InvalidParams(f"patience must be >= 0, got {params.patience}")
    max_span = params.max_span_len
    if max_span is None:
        max_span = default_max_span_len(source_len)
    if max_span < 1:
        raise InvalidParams(f"max_span_len must be >= 1, got {max_span}")
    return params.beam_width, params.patience, max_span


def _psgd_run(
    model: SequenceModel,
    task: TsTask,
    params: PsgdParams,
    two_pass: bool,
    trace: list | None,
) -> Suggestion:
    validate_task(task, model.vocab)
    beam_width, patience, max_span = _resolve_psgd_params(params, len(task.source))
    src = as_tokens(task.source)
    p = as_tokens(task.prefix)
    s = as_tokens(task.suffix)
    eos = model.vocab.eos_id
    content = model.vocab.content_ids

    t0 = time.perf_counter()
    counters = {"fw": 0, "pos": 0}

    def score_item(span: Tokens) -> tuple[float, np.ndarray]:
        """One scoring round for a span: whole-sequence score and the log
        distribution of the token following prefix + span."""
        target = p + span + s
        fp = model.forced_pass(src, target)
        counters["fw"] += 1
        counters["pos"] += len(target) + 1
        log_m = fp.log_matrix()
        total = float(log_m[len(target), eos])
        for t, tok in enumerate(target):
            total += float(log_m[t, tok])
        score = normalized_score(total, len(target), params.scoring, params.include_eos_in_len)
        if two_pass:
            fp2 = model.forced_pass(src, p + span)
            counters["fw"] += 1
            counters["pos"] += len(p) + len(span) + 1
            next_log_row = fp2.log_matrix()[-1]
        else:
            next_log_row = log_m[len(p) + len(span)]
        return score, next_log_row

    best = BestRecord()
    beam: list[Hypothesis] = [Hypothesis((), 0.0)]
    n = 0
    emitted = 0
    stop_reason = STOP_PATIENCE

    if patience == 0:
        # The loop below would exit before scoring anything; score the empty
        # span once so the reported score is real and recomputable.
        score, _ = score_item(())
        best.offer(score, 0, ())
        if trace is not None:
            trace.append([((), score)])
    else:
        while n - best.best_step < patience:
            scored = []
            for hyp in beam:
                score, next_log_row = score_item(hyp.span_tokens)
                best.offer(score, n, hyp.span_tokens)
                scored.append((hyp, score, next_log_row))
            if trace is not None:
                trace.append([(hyp.span_tokens, score) for hyp, score, _ in scored])
            if n == max_span:
                stop_reason = STOP_MAX_LEN
                break
            candidates = [
                (hyp.span_logprob + float(next_log_row[tok]), hyp.span_tokens + (tok,))
                for hyp, _score, next_log_row in scored
                for tok in content
            ]
            candidates.sort(key=lambda c: (-c[0], c[1]))
            beam = [Hypothesis(tokens, lp) for lp, tokens in candidates[:beam_width]]
            if not beam:
                stop_reason = STOP_EMPTY_BEAM
                break
            emitted += 1
            n += 1

    stats = DecodeStats(
        forward_passes=counters["fw"],
        positions_scored=counters["pos"],
        emitted_steps=emitted,
        stop_reason=stop_reason,
        wall_time_us=_wall_us(t0),
    )
    return Suggestion(
        span=TokenSeq(best.best_span, ROLE_SPAN),
        whole_seq_score=best.best_score,
        stats=stats,
    )


def psgd(model: SequenceModel, task: TsTask, params: PsgdParams | None = None) -> Suggestion:
    """Prefix-suffix guided span decoding: one forced pass per beam item per
    step serves both the stopping score and the next-token distribution."""
    return _psgd_run(model, task, params or PsgdParams(), two_pass=False, trace=None)


def psgd_two_pass(model: SequenceModel, task: TsTask, params: PsgdParams | None = None) -> Suggestion:
    """Reference implementation that fetches the stopping score and the
    next-token distribution with two separate forced passes per beam item.
    Must produce bit-identical spans and scores to ``psgd`` with exactly
    twice the forward passes."""
    return _psgd_run(model, task, params or PsgdParams(), two_pass=True, trace=None)


def psgd_with_trace(
    model: SequenceModel, task: TsTask, params: PsgdParams | None = None
) -> tuple[Suggestion, list[list[tuple[Tokens, float]]]]:
    """Like ``psgd`` but also returns, per scoring round, the (span, score)
    pairs examined. Useful for verifying the stopping rule against oracles."""
    trace: list[list[tuple[Tokens, float]]] = []
    suggestion = _psgd_run(model, task, params or PsgdParams(), two_pass=False, trace=trace)
    return suggestion, trace


# ---------------------------------------------------------------------------
# Dynamic beam allocation
# ---------------------------------------------------------------------------

def _advance_progress(progress: tuple[int, ...], constraints: tuple[Tokens, ...], tok: int) -> tuple[int, ...]:
    """Per-phrase matcher state update. Completed phrases stay completed;
    partial progress resets on mismatch (and may restart on the phrase's
    first token)."""
    out = []
    for pos, phrase in zip(progress, constraints):
        if pos == len(phrase):
            out.append(pos)
        elif tok == phrase[pos]:
            out.append(pos + 1)
        elif tok == phrase[0]:
            out.append(1)
        else:
            out.append(0)
    return tuple(out)


def _needed_tokens(progress: tuple[int, ...], constraints: tuple[Tokens, ...]) -> set[int]:
    return {
        phrase[pos] for pos, phrase in zip(progress, constraints) if pos < len(phrase)
    }


def dba_decode(
    model: SequenceModel,
    source,
    params: DbaParams,
    length_norm: bool = False,
) -> tuple[TokenSeq, float, DecodeStats]:
    """Full-sequence beam search with hard phrasal constraints.

    Beam slots are divided as evenly as possible among banks indexed by the
    number of satisfied constraint tokens (partial phrase progress counts),
    with remainders and unfillable slots going to higher banks / the best
    remaining candidates. The per-step candidate pool is the global top-k
    expansion set plus, for every hypothesis, the forced next token of each
    unfinished phrase. Only constraint-complete hypotheses may finish, so
    every returned sequence contains every phrase contiguously.

    Termination mirrors ``beam_search``: length cap, emptied beam (raw
    scoring drops hypotheses that cannot beat the best finished sequence),
    or, under length normalization, beam-width many EOS candidates having
    ranked inside the beam window; the latter two report ``empty_beam``.
    """
    if params.beam_width < 1:
        raise InvalidParams(f"beam_width must be >= 1, got {params.beam_width}")
    if params.max_len < 0:
        raise InvalidParams(f"max_len must be >= 0, got {params.max_len}")
    constraints = tuple(as_tokens(c) for c in params.constraints)
    for c in constraints:
        if len(c) == 0:
            raise InvalidParams("constraint phrases must be non-empty")
    src = as_tokens(source)
    eos = model.vocab.eos_id
    content = model.vocab.content_ids
    beam_width = params.beam_width

    def is_complete(progress: tuple[int, ...]) -> bool:
        return all(pos == len(phrase) for pos, phrase in zip(progress, constraints))

    def selection_score(raw: float, tokens: Tokens) -> float:
        return normalized_score(raw, len(tokens)) if length_norm else raw

    t0 = time.perf_counter()
    fw = 0
    pos_scored = 0
    emitted = 0
    stop_reason = STOP_MAX_LEN
    hard_finishes = 0

    initial = tuple(0 for _ in constraints)
    beam: list[tuple[Tokens, float, tuple[int, ...]]] = [((), 0.0, initial)]
    finished: dict[Tokens, float] = {}
    best_finished_raw = float("-inf")

    def record(tokens: Tokens, raw: float) -> None:
        nonlocal best_finished_raw
        if tokens not in finished:
            finished[tokens] = raw
        best_finished_raw = max(best_finished_raw, raw)

    for step in range(params.max_len + 1):
        rows = []
        for tokens, lp, progress in beam:
            log_row = model.forced_pass(src, tokens).log_matrix()[-1]
            fw += 1
            pos_scored += len(tokens) + 1
            rows.append(log_row)
            if is_complete(progress) and int(np.argmax(log_row)) == eos:
                record(tokens, lp + float(log_row[eos]))
        if step == params.max_len:
            if constraints:
                # Forced finish at the length budget: close every alive
                # complete hypothesis with EOS rather than return nothing.
                for (tokens, lp, progress), log_row in zip(beam, rows):
                    if is_complete(progress):
                        record(tokens, lp + float(log_row[eos]))
            stop_reason = STOP_MAX_LEN
            break

        # Global expansion ranking. EOS candidates (complete hypotheses only)
        # finish via the same beam window as beam_search, or by winning a
        # slot inside their own bank below (without which finishing would
        # have to outrank every unconstrained hypothesis globally). They
        # never enter the alive beam.
        expansions = []
        for (tokens, lp, progress), log_row in zip(beam, rows):
            if is_complete(progress):
                expansions.append((lp + float(log_row[eos]), tokens, progress, None))
            for tok in content:
                expansions.append((lp + float(log_row[tok]), tokens + (tok,), progress, tok))
        expansions.sort(key=lambda c: (-c[0], len(c[1]), c[1]))
        finishes_this_round: set[Tokens] = set()
        # Same beam-window finishing rule as beam_search.
        for cand in expansions[:beam_width]:
            if cand[3] is None:
                record(cand[1], cand[0])
                finishes_this_round.add(cand[1])
        content_exp = [c for c in expansions if c[3] is not None]

        # Candidate pool: top-k content expansions plus forced constraint
        # tokens, plus the EOS candidates competing for bank slots.
        pool = {c[1]: c for c in content_exp[:beam_width]}
        for (tokens, lp, progress), log_row in zip(beam, rows):
            for tok in _needed_tokens(progress, constraints):
                child = tokens + (tok,)
                if child not in pool:
                    pool[child] = (lp + float(log_row[tok]), child, progress, tok)

        # Advance constraint states and group by bank; EOS candidates keep
        # their (complete) progress and carry an is_eos marker.
        banked: dict[int, list[tuple[float, Tokens, tuple[int, ...], bool]]] = {}
        for lp_c, child, progress, tok in pool.values():
            new_progress = _advance_progress(progress, constraints, tok)
            banked.setdefault(sum(new_progress), []).append((lp_c, child, new_progress, False))
        for lp_c, tokens, progress, _none in expansions:
            if _none is None:
                banked.setdefault(sum(progress), []).append((lp_c, tokens, progress, True))
        if not banked:
            stop_reason = STOP_EMPTY_BEAM
            break
        for cands in banked.values():
            cands.sort(key=lambda c: (-c[0], len(c[1]), c[1]))

        # Even slot split over non-empty banks, remainders to higher banks.
        # EOS candidates ranking inside their bank's slots finish; alive
        # slots are backfilled with the bank's best content candidates.
        banks = sorted(banked, reverse=True)
        base, rem = divmod(beam_width, len(banks))
        selected: list[tuple[float, Tokens, tuple[int, ...]]] = []
        leftovers: list[tuple[float, Tokens, tuple[int, ...]]] = []
        for i, bank in enumerate(banks):
            slots = base + (1 if i < rem else 0)
            for cand in banked[bank][:slots]:
                if cand[3]:
                    record(cand[1], cand[0])
                    finishes_this_round.add(cand[1])
            bank_content = [c for c in banked[bank] if not c[3]]
            selected.extend((lp_c, child, prog) for lp_c, child, prog, _ in bank_content[:slots])
            leftovers.extend((lp_c, child, prog) for lp_c, child, prog, _ in bank_content[slots:])
        if len(selected) < beam_width and leftovers:
            leftovers.sort(key=lambda c: (-c[0], c[1]))
            selected.extend(leftovers[: beam_width - len(selected)])

        hard_finishes += len(finishes_this_round)
        if length_norm and hard_finishes >= beam_width:
            stop_reason = STOP_EMPTY_BEAM
            break
        if not length_norm:
            selected = [c for c in selected if c[0] > best_finished_raw]
        if not selected:
            stop_reason = STOP_EMPTY_BEAM
            break
        selected.sort(key=lambda c: (-c[0], c[1]))
        beam = [(child, lp_c, progress) for lp_c, child, progress in selected]
        emitted += 1

    if not finished:
        raise ConstraintsUnsatisfiable(
            f"no constraint-complete hypothesis finished within max_len={params.max_len}"
        )
    best_tokens, best_sel = _pick_best(finished.items(), selection_score)

    stats = DecodeStats(
        forward_passes=fw,
        positions_scored=pos_scored,
        emitted_steps=emitted,
        stop_reason=stop_reason,
        wall_time_us=_wall_us(t0),
    )
    return TokenSeq(best_tokens, ROLE_TARGET), best_sel, stats


def _find_first(hay: Tokens, needle: Tokens) -> int | None:
    if not needle:
        return 0
    for i in range(len(hay) - len(needle) + 1):
        if hay[i : i + len(needle)] == needle:
            return i
    return None


def _find_last(hay: Tokens, needle: Tokens) -> int | None:
    if not needle:
        return len(hay)
    for i in range(len(hay) - len(needle), -1, -1):
        if hay[i : i + len(needle)] == needle:
            return i
    return None


def extract_span(output: Tokens, prefix: Tokens, suffix: Tokens) -> Tokens:
    """Span between the end of the first prefix occurrence and the start of
    the last suffix occurrence; if that window is ill-formed, fall back to
    deleting the matched constraint tokens and returning the remainder."""
    p_start = _find_first(output, prefix)
    s_start = _find_last(output, suffix)
    if p_start is None or s_start is None:
        # Unreachable for dba_decode outputs (hard-constraint guarantee),
        # but keep the fallback total for direct callers.
        p_start = p_start if p_start is not None else 0
        s_start = s_start if s_start is not None else len(output)
    p_end = p_start + len(prefix)
    if p_end <= s_start:
        return output[p_end:s_start]
    drop = set(range(p_start, p_end)) | set(range(s_start, s_start + len(suffix)))
    return tuple(tok for i, tok in enumerate(output) if i not in drop)


def dba_suggest(
    model: SequenceModel,
    task: TsTask,
    beam_width: int,
    max_len: int | None = None,
    scoring: str = SCORING_MEAN_LOGPROB,
    include_eos_in_len: bool = False,
    length_norm: bool = True,
) -> Suggestion:
    """Generate a span suggestion with DBA: decode the full sentence under
    prefix/suffix phrase constraints, then cut the span out of the output.

    Selection is length-normalized by default, the usual convention for
    full-sentence translation decoding. The reported score is the same
    whole-sequence score PSGD reports for prefix + span + suffix, computed
    with one extra forced pass so results from both decoders are directly
    comparable.
    """
    validate_task(task, model.vocab)
    p = as_tokens(task.prefix)
    s = as_tokens(task.suffix)
    if max_len is None:
        max_len = len(p) + len(s) + default_max_span_len(len(task.source))
    constraints = tuple(c for c in (p, s) if c)
    output, _sel, stats = dba_decode(
        model, task.source, DbaParams(beam_width, max_len, constraints), length_norm
    )
    span = extract_span(output.tokens, p, s)
    whole = filled_score(model, task.source, p, span, s, scoring, include_eos_in_len)
    stats = DecodeStats(
        forward_passes=stats.forward_passes + 1,
        positions_scored=stats.positions_scored + len(p) + len(span) + len(s) + 1,
        emitted_steps=stats.emitted_steps,
        stop_reason=stats.stop_reason,
        wall_time_us=stats.wall_time_us,
    )
    return Suggestion(span=TokenSeq(span, ROLE_SPAN), whole_seq_score=whole, stats=stats)


def count_theoretical_steps(task: TsTask, patience: int) -> tuple[int, int]:
    """Idealized decoding-step counts: span decoding needs span length plus
    patience; full-sentence constrained decoding needs the whole length."""
    if task.gold_span is None:
        raise MissingGoldSpan(f"task {task.task_id} has no gold span")
    t_p = len(task.prefix)
    t_r = len(task.gold_span)
    t_s = len(task.suffix)
    return t_r + patience, t_p + t_r + t_s
