"""Whole-sequence scoring shared by the span decoder and the enumeration oracle.

A candidate filling is judged by the log probability of the complete target
(prefix + span + suffix, with the end-of-sentence term always included in
the numerator) normalized by the content length. Two normalizations exist:

* ``mean_logprob`` (default): total log-probability divided by length —
  the standard length-normalized score.
* ``prob_over_length``: raw probability divided by length, kept in the log
  domain as ``total - log(length)``. This penalizes length twice as hard
  and degenerates for long sequences, but is exposed for fidelity
  experiments.

``include_eos_in_len`` adds one to the normalizing length for the EOS term;
by default the length counts content tokens only.
"""

from __future__ import annotations

import math

from .lm import SequenceModel, seq_logprob

SCORING_MEAN_LOGPROB = "mean_logprob"
SCORING_PROB_OVER_LENGTH = "prob_over_length"
SCORING_MODES = (SCORING_MEAN_LOGPROB, SCORING_PROB_OVER_LENGTH)


def prefer(
    score: float,
    span: tuple[int, ...],
    best_score: float,
    best_span: tuple[int, ...],
) -> bool:
    """Candidate ordering used by every search and oracle: higher score wins;
    ties go to the shorter span, then the lexicographically smaller one."""
    if score != best_score:
        return score > best_score
    return (len(span), span) < (len(best_span), best_span)


def normalized_score(
    total_logprob: float,
    content_len: int,
    scoring: str = SCORING_MEAN_LOGPROB,
    include_eos_in_len: bool = False,
) -> float:
    """Normalize a summed log-probability by the sequence length.

    ``content_len`` is the number of content tokens scored (EOS excluded);
    a zero length (empty prefix, span and suffix) normalizes by 1.
    """
    if scoring not in SCORING_MODES:
        raise ValueError(f"unknown scoring mode {scoring!r}")
    length = content_len + (1 if include_eos_in_len else 0)
    length = max(length, 1)
    if scoring == SCORING_MEAN_LOGPROB:
        return total_logprob / length
    return total_logprob - math.log(length)


def filled_score(
    model: SequenceModel,
    source,
    prefix,
    span,
    suffix,
    scoring: str = SCORING_MEAN_LOGPROB,
    include_eos_in_len: bool = False,
) -> float:
    """Score of prefix + span + suffix computed from scratch in one pass."""
    from .lm import as_tokens

    target = as_tokens(prefix) + as_tokens(span) + as_tokens(suffix)
    total = seq_logprob(model, source, target, include_eos=True)
    return normalized_score(total, len(target), scoring, include_eos_in_len)
