"""Conditional autoregressive sequence models over integer vocabularies.

A model maps (source sequence, target prefix) to a normalized next-token
distribution. The only scoring entry point is ``forced_pass``: one call
scores a whole target sequence and returns the distribution at every
position, which is also how a single call can serve both sequence scoring
and next-token selection.

All rows are post-processed the same way: BOS gets probability exactly 0,
and every other entry is floored at ``EPS_FLOOR`` (by mixing in that much
uniform mass), so scoring an arbitrary constraint token can never produce
-inf. Rows that are uniform over non-BOS ids are unchanged by the mix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import TokenOutOfRange, ReservedTokenInContent, TokenSeq, TsError, Vocab
from .rng import Stream, hash_key, mix64

EPS_FLOOR = 1e-12

_KIND_UNIFORM = "uniform"
_KIND_TABLE = "table"
_KIND_NGRAM = "ngram_gen"


class UnnormalizedRow(TsError):
    """A supplied probability row does not sum to 1 within 1e-9."""


Tokens = tuple[int, ...]


def as_tokens(seq: TokenSeq | Sequence[int]) -> Tokens:
    if isinstance(seq, TokenSeq):
        return seq.tokens
    return tuple(int(t) for t in seq)


@dataclass(frozen=True)
class StepDistribution:
    """A normalized next-token distribution at one target position."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1:
            raise ValueError("probs must be a vector")
        if probs.min() < 0.0 or abs(float(probs.sum()) - 1.0) > 1e-9:
            raise ValueError("probs must be non-negative and sum to 1 within 1e-9")


@dataclass(frozen=True)
class ForcedPassResult:
    """Distributions for every position of one scored target sequence.

    ``distributions[t]`` is the next-token distribution given BOS plus the
    first ``t`` target tokens; there are ``len(target) + 1`` entries.
    """

    distributions: tuple[StepDistribution, ...]
    _log_rows: tuple = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.distributions)

    def matrix(self) -> np.ndarray:
        return np.stack([d.probs for d in self.distributions])

    def log_matrix(self) -> np.ndarray:
        if self._log_rows is not None:
            return np.stack(self._log_rows)
        # BOS entries are exactly 0 and legitimately map to -inf.
        with np.errstate(divide="ignore"):
            return np.log(self.matrix())


@dataclass(frozen=True)
class ModelDescriptor:
    name: str
    vocab: Vocab
    context_order: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.context_order < 1:
            raise ValueError("context_order must be >= 1")


def _finalize_row(raw: np.ndarray, bos_id: int) -> np.ndarray:
    """Zero BOS, renormalize, and mix in the EPS_FLOOR uniform floor."""
    row = np.asarray(raw, dtype=np.float64).copy()
    row[bos_id] = 0.0
    total = row.sum()
    if total <= 0.0:
        raise ValueError("row has no probability mass outside BOS")
    row /= total
    k = row.size - 1
    row *= 1.0 - k * EPS_FLOOR
    row += EPS_FLOOR
    row[bos_id] = 0.0
    row.setflags(write=False)
    return row


class SequenceModel:
    """Base class: subclasses provide one raw row per (source, context).

    Finalized rows and their logs are memoized per (source, context); the
    cache is safe under concurrent use because inserts are idempotent.
    """

    def __init__(self, descriptor: ModelDescriptor) -> None:
        self.descriptor = descriptor
        self._row_cache: dict[tuple[Tokens, Tokens], tuple[np.ndarray, np.ndarray]] = {}

    @property
    def vocab(self) -> Vocab:
        return self.descriptor.vocab

    def _context(self, target_prefix: Tokens) -> Tokens:
        """The conditioning context: last ``order`` tokens of BOS + prefix."""
        padded = (self.vocab.bos_id,) + target_prefix
        return padded[-self.descriptor.context_order:]

    def _raw_row(self, source: Tokens, context: Tokens) -> np.ndarray:
        raise NotImplementedError

    def _finalized(self, source: Tokens, context: Tokens) -> tuple[np.ndarray, np.ndarray]:
        key = (source, context)
        hit = self._row_cache.get(key)
        if hit is None:
            probs = _finalize_row(self._raw_row(source, context), self.vocab.bos_id)
            with np.errstate(divide="ignore"):
                logs = np.log(probs)
            logs.setflags(write=False)
            hit = (probs, logs)
            self._row_cache[key] = hit
        return hit

    def _check(self, seq: Tokens, *, content_only: bool) -> None:
        for tok in seq:
            if tok < 0 or tok >= self.vocab.size:
                raise TokenOutOfRange(f"token id {tok} outside vocab of size {self.vocab.size}")
            if content_only and tok in (self.vocab.bos_id, self.vocab.eos_id):
                raise ReservedTokenInContent(f"reserved token id {tok} in target sequence")

    def forced_pass(self, source: TokenSeq | Sequence[int], target: TokenSeq | Sequence[int]) -> ForcedPassResult:
        src = as_tokens(source)
        tgt = as_tokens(target)
        self._check(src, content_only=False)
        self._check(tgt, content_only=True)
        pairs = [self._finalized(src, self._context(tgt[:t])) for t in range(len(tgt) + 1)]
        dists = tuple(StepDistribution(probs) for probs, _ in pairs)
        return ForcedPassResult(dists, tuple(logs for _, logs in pairs))


def forced_pass(model: SequenceModel, source, target) -> ForcedPassResult:
    """Score ``target`` under ``model`` in one pass; see ForcedPassResult."""
    return model.forced_pass(source, target)


def seq_logprob(model: SequenceModel, source, target, include_eos: bool = True) -> float:
    """Natural-log probability of ``target`` given ``source`` via one forced pass."""
    tgt = as_tokens(target)
    result = model.forced_pass(source, tgt)
    log_probs = result.log_matrix()
    total = 0.0
    for t, tok in enumerate(tgt):
        total += float(log_probs[t, tok])
    if include_eos:
        total += float(log_probs[len(tgt), model.vocab.eos_id])
    return total


class UniformModel(SequenceModel):
    """Every distribution is uniform over all non-BOS ids."""

    def __init__(self, vocab: Vocab) -> None:
        super().__init__(ModelDescriptor(name="uniform", vocab=vocab, context_order=1))
        row = np.full(vocab.size, 1.0 / (vocab.size - 1), dtype=np.float64)
        row[vocab.bos_id] = 0.0
        self._row = row

    def _context(self, target_prefix: Tokens) -> Tokens:
        # Position-independent model: one cache entry per source.
        return ()

    def _raw_row(self, source: Tokens, context: Tokens) -> np.ndarray:
        return self._row


class TableModel(SequenceModel):
    """A lookup model: explicit rows per (source, context), uniform fallback.

    Table keys are (source tokens, context tokens) pairs where the context
    is the last ``order`` tokens of the BOS-prefixed target (so BOS ids
    appear in contexts near the sequence start). Rows must be normalized;
    positions without a row fall back to uniform over non-BOS ids.
    """

    def __init__(
        self,
        vocab: Vocab,
        order: int,
        table: Mapping[tuple[Tokens, Tokens], Sequence[float]],
        name: str = "table",
    ) -> None:
        super().__init__(ModelDescriptor(name=name, vocab=vocab, context_order=order))
        self._table: dict[tuple[Tokens, Tokens], np.ndarray] = {}
        for (src, ctx), row in table.items():
            arr = np.asarray(row, dtype=np.float64)
            if arr.shape != (vocab.size,):
                raise ValueError(f"row for {(src, ctx)} has wrong length {arr.shape}")
            if arr.min() < 0.0:
                raise UnnormalizedRow(f"row for {(src, ctx)} has negative entries")
            if abs(float(arr.sum()) - 1.0) > 1e-9:
                raise UnnormalizedRow(
                    f"row for {(src, ctx)} sums to {float(arr.sum())}, expected 1"
                )
            if len(ctx) > order:
                raise ValueError(f"context {ctx} longer than order {order}")
            self._table[(tuple(src), tuple(ctx))] = arr
        uniform = np.full(vocab.size, 1.0 / (vocab.size - 1), dtype=np.float64)
        uniform[vocab.bos_id] = 0.0
        self._fallback = uniform

    def _raw_row(self, source: Tokens, context: Tokens) -> np.ndarray:
        return self._table.get((source, context), self._fallback)

    @property
    def table(self) -> dict[tuple[Tokens, Tokens], np.ndarray]:
        return dict(self._table)


class NgramGenModel(SequenceModel):
    """Deterministic synthetic n-gram model with Dirichlet-distributed rows.

    Each (source, context) row is drawn lazily from a symmetric
    Dirichlet(concentration) over non-BOS ids, keyed by a platform-stable
    hash of (seed, source, context), then memoized. An optional perturbation
    redraws a fraction of contexts under a second seed, which yields a
    "sibling" model that mostly agrees with the base one but makes plausible
    errors elsewhere.

    The memo cache tolerates concurrent readers/writers: inserts are
    idempotent because every thread computes the identical row.
    """

    def __init__(
        self,
        vocab: Vocab,
        order: int,
        seed: int,
        concentration: float,
        perturb_seed: int | None = None,
        perturb_rate: float = 0.0,
    ) -> None:
        if concentration <= 0.0:
            raise ValueError("concentration must be > 0")
        if not 0.0 <= perturb_rate <= 1.0:
            raise ValueError("perturb_rate must be in [0, 1]")
        super().__init__(
            ModelDescriptor(name="ngram_gen", vocab=vocab, context_order=order, seed=seed)
        )
        self.concentration = float(concentration)
        self.perturb_seed = perturb_seed
        self.perturb_rate = float(perturb_rate)
        self._cache: dict[tuple[Tokens, Tokens], np.ndarray] = {}

    def _draw_row(self, seed: int, source: Tokens, context: Tokens) -> np.ndarray:
        stream = Stream(hash_key(seed, 0x6E6772616D, source, context))
        weights = stream.dirichlet(self.concentration, self.vocab.size - 1)
        row = np.zeros(self.vocab.size, dtype=np.float64)
        ids = [i for i in range(self.vocab.size) if i != self.vocab.bos_id]
        row[ids] = weights
        return row

    def _raw_row(self, source: Tokens, context: Tokens) -> np.ndarray:
        key = (source, context)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        seed = self.descriptor.seed
        if self.perturb_seed is not None and self.perturb_rate > 0.0:
            coin = Stream(hash_key(self.perturb_seed, 0x636F696E, source, context)).uniform()
            if coin < self.perturb_rate:
                seed = mix64(seed ^ mix64(self.perturb_seed))
        row = self._draw_row(seed, source, context)
        self._cache[key] = row
        return row


def make_uniform_model(vocab: Vocab) -> UniformModel:
    return UniformModel(vocab)


def make_table_model(
    vocab: Vocab, order: int, table: Mapping[tuple[Tokens, Tokens], Sequence[float]]
) -> TableModel:
    return TableModel(vocab, order, table)


def make_ngram_gen_model(
    vocab: Vocab, order: int, seed: int, concentration: float
) -> NgramGenModel:
    return NgramGenModel(vocab, order, seed, concentration)


def make_perturbed_sibling(model: NgramGenModel, perturb_seed: int, rate: float = 0.3) -> NgramGenModel:
    """A sibling of ``model`` whose rows differ on ~``rate`` of contexts."""
    return NgramGenModel(
        vocab=model.vocab,
        order=model.descriptor.context_order,
        seed=model.descriptor.seed,
        concentration=model.concentration,
        perturb_seed=perturb_seed,
        perturb_rate=rate,
    )


# ---------------------------------------------------------------------------
# Model spec files
# ---------------------------------------------------------------------------

def _encode_table_key(src: Tokens, ctx: Tokens) -> str:
    return "src:%s|ctx:%s" % (",".join(map(str, src)), ",".join(map(str, ctx)))


def _decode_table_key(key: str) -> tuple[Tokens, Tokens]:
    src_part, ctx_part = key.split("|")
    if not src_part.startswith("src:") or not ctx_part.startswith("ctx:"):
        raise ValueError(f"malformed table key {key!r}")

    def ints(text: str) -> Tokens:
        return tuple(int(v) for v in text.split(",") if v != "")

    return ints(src_part[4:]), ints(ctx_part[4:])


def model_to_spec(model: SequenceModel) -> dict:
    """Serialize a model to the JSON spec schema (bos=0/eos=1 convention)."""
    vocab = model.vocab
    if (vocab.bos_id, vocab.eos_id) != (0, 1):
        raise ValueError("model spec files assume bos_id=0 and eos_id=1")
    spec = {
        "kind": model.descriptor.name,
        "vocab_size": vocab.size,
        "order": model.descriptor.context_order,
        "seed": model.descriptor.seed,
        "concentration": 0.0,
        "table": None,
    }
    if isinstance(model, NgramGenModel):
        if model.perturb_seed is not None:
            raise ValueError("perturbed sibling models are not serializable")
        spec["concentration"] = model.concentration
    elif isinstance(model, TableModel):
        spec["table"] = {
            _encode_table_key(src, ctx): [float(v) for v in row]
            for (src, ctx), row in sorted(model.table.items())
        }
    elif not isinstance(model, UniformModel):
        raise ValueError(f"cannot serialize model kind {model.descriptor.name!r}")
    return spec


def model_from_spec(spec: Mapping) -> SequenceModel:
    vocab = Vocab(size=int(spec["vocab_size"]))
    kind = spec["kind"]
    if kind == _KIND_UNIFORM:
        return UniformModel(vocab)
    if kind == _KIND_TABLE:
        table = {
            _decode_table_key(key): row for key, row in (spec["table"] or {}).items()
        }
        return TableModel(vocab, int(spec["order"]), table)
    if kind == _KIND_NGRAM:
        return NgramGenModel(
            vocab, int(spec["order"]), int(spec["seed"]), float(spec["concentration"])
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_model_spec(path: str | Path, model: SequenceModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_spec(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model_spec(path: str | Path) -> SequenceModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_spec(json.load(fh))
