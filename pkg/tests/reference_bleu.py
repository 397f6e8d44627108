"""Independent corpus BLEU used to cross-check the library implementation.

Deliberately written from scratch against the textbook definition (clipped
n-gram counts pooled over the corpus, geometric mean of four precisions,
brevity penalty) without importing anything from the package. Keep it that
way: this file is the second route of a dual-route check.
"""

import math


def _count_ngrams(seq, n):
    counts = {}
    for i in range(len(seq) - n + 1):
        key = tuple(seq[i : i + n])
        counts[key] = counts.get(key, 0) + 1
    return counts


def reference_corpus_bleu(candidates, references):
    """Returns (score, precisions, brevity_penalty)."""
    assert len(candidates) == len(references) and candidates
    matched = [0, 0, 0, 0]
    attempted = [0, 0, 0, 0]
    total_cand = 0
    total_ref = 0
    for cand, ref in zip(candidates, references):
        cand = list(cand)
        ref = list(ref)
        total_cand += len(cand)
        total_ref += len(ref)
        for n in (1, 2, 3, 4):
            cand_counts = _count_ngrams(cand, n)
            ref_counts = _count_ngrams(ref, n)
            for gram, count in cand_counts.items():
                attempted[n - 1] += count
                matched[n - 1] += min(count, ref_counts.get(gram, 0))

    precisions = []
    for n in range(4):
        precisions.append(matched[n] / attempted[n] if attempted[n] else 0.0)

    if total_cand == 0:
        bp = 0.0
    elif total_cand >= total_ref:
        bp = 1.0
    else:
        bp = math.exp(1.0 - total_ref / total_cand)

    if min(precisions) <= 0.0:
        return 0.0, tuple(precisions), bp
    mean_log = sum(math.log(p) for p in precisions) / 4.0
    return bp * math.exp(mean_log) * 100.0, tuple(precisions), bp
