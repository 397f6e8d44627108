import json

import pytest
from hypothesis import given, strategies as st

from tsdecode.core import (
    ReservedTokenInContent,
    ResultRow,
    TokenOutOfRange,
    TokenSeq,
    TsTask,
    Vocab,
    read_results_jsonl,
    read_tasks_jsonl,
    result_from_dict,
    result_to_dict,
    task_from_dict,
    task_to_dict,
    validate_task,
    write_results_jsonl,
    write_tasks_jsonl,
)


def make_task(source, prefix, suffix, gold_span=None, gold_full=None, task_id="t"):
    return TsTask(
        task_id,
        TokenSeq(tuple(source), "source"),
        TokenSeq(tuple(prefix), "prefix"),
        TokenSeq(tuple(suffix), "suffix"),
        None if gold_span is None else TokenSeq(tuple(gold_span), "span"),
        None if gold_full is None else TokenSeq(tuple(gold_full), "target"),
    )


class TestVocab:
    def test_content_ids_exclude_reserved(self):
        assert Vocab(5).content_ids == (2, 3, 4)

    def test_too_small(self):
        with pytest.raises(ValueError):
            Vocab(2)

    def test_bos_eos_must_differ(self):
        with pytest.raises(ValueError):
            Vocab(4, bos_id=1, eos_id=1)

    def test_reserved_in_range(self):
        with pytest.raises(ValueError):
            Vocab(4, bos_id=0, eos_id=4)


class TestValidateTask:
    def test_valid_task_passes_through(self):
        vocab = Vocab(10)
        task = make_task([2, 3], [4], [5], gold_span=[6], gold_full=[4, 6, 5])
        assert validate_task(task, vocab) is task

    def test_token_out_of_range(self):
        vocab = Vocab(10)
        task = make_task([2], [9, 10], [])
        with pytest.raises(TokenOutOfRange):
            validate_task(task, vocab)

    def test_reserved_token_in_content(self):
        vocab = Vocab(10)
        task = make_task([2], [], [vocab.eos_id])
        with pytest.raises(ReservedTokenInContent):
            validate_task(task, vocab)

    def test_empty_prefix_and_suffix_are_valid(self):
        validate_task(make_task([2], [], []), Vocab(10))


def test_gold_consistency_enforced():
    with pytest.raises(ValueError):
        make_task([2], [3], [4], gold_span=[5], gold_full=[3, 5, 5])


def test_token_seq_rejects_unknown_role():
    with pytest.raises(ValueError):
        TokenSeq((1, 2), "body")


content_tokens = st.lists(st.integers(min_value=2, max_value=99), max_size=6)


@st.composite
def tasks(draw):
    prefix = tuple(draw(content_tokens))
    suffix = tuple(draw(content_tokens))
    span = draw(st.none() | content_tokens.map(tuple))
    gold_full = None if span is None else prefix + span + suffix
    return make_task(
        tuple(draw(content_tokens)),
        prefix,
        suffix,
        gold_span=span,
        gold_full=gold_full,
        task_id=draw(st.text(st.characters(categories=("L", "N")), max_size=8)),
    )


@given(tasks())
def test_task_roundtrip_field_for_field(task):
    assert task_from_dict(task_to_dict(task)) == task


@given(tasks())
def test_task_dict_is_json_serializable(task):
    line = json.dumps(task_to_dict(task))
    assert task_from_dict(json.loads(line)) == task


def test_optional_fields_serialize_as_null():
    d = task_to_dict(make_task([2], [3], []))
    assert d["gold_span"] is None and d["gold_full"] is None


def test_tasks_jsonl_roundtrip(tmp_path):
    tasks_ = [
        make_task([2, 3], [4], [5], gold_span=[6], gold_full=[4, 6, 5], task_id="a"),
        make_task([7], [], [], task_id="b"),
    ]
    path = tmp_path / "tasks.jsonl"
    write_tasks_jsonl(path, tasks_)
    assert read_tasks_jsonl(path) == tasks_


def test_results_jsonl_roundtrip(tmp_path):
    rows = [
        ResultRow("a", "psgd", (2, 3), -1.25, 10, 40, 4, "patience", 123),
        ResultRow("b", "dba", (), 0.0, 0, 0, 0, "max_len", 0, error="ConstraintsUnsatisfiable"),
    ]
    path = tmp_path / "results.jsonl"
    write_results_jsonl(path, rows)
    assert read_results_jsonl(path) == rows


def test_result_dict_hides_absent_error():
    row = ResultRow("a", "psgd", (2,), -1.0, 1, 2, 1, "patience", 5)
    d = result_to_dict(row)
    assert "error" not in d
    assert result_from_dict(d) == row


def test_decode_stats_rejects_unknown_stop_reason():
    from tsdecode.core import DecodeStats

    with pytest.raises(ValueError):
        DecodeStats(1, 1, 0, "bored", 0)


def test_suggestion_requires_finite_score():
    from tsdecode.core import DecodeStats, Suggestion

    stats = DecodeStats(1, 1, 0, "patience", 0)
    with pytest.raises(ValueError):
        Suggestion(TokenSeq((), "span"), float("-inf"), stats)
