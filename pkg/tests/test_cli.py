import json

from tsdecode.cli import main
from tsdecode.core import read_results_jsonl, read_tasks_jsonl, write_results_jsonl
from tsdecode.core import ResultRow


GEN_CONFIG = {
    "vocab_size": 12,
    "n_tasks": 3,
    "source_len_range": [4, 7],
    "seed": 9,
    "mask_ratio_list": [0.4],
    "model_spec": {
        "kind": "ngram_gen",
        "vocab_size": 12,
        "order": 2,
        "seed": 9,
        "concentration": 0.2,
        "table": None,
    },
}

SWEEP_CONFIG = dict(
    GEN_CONFIG,
    decoders=["psgd", "dba"],
    pt_values=[2],
    beam_width=3,
    repetitions=1,
)


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def run_gen(tmp_path):
    cfg = write_config(tmp_path, GEN_CONFIG)
    tasks_path = tmp_path / "tasks.jsonl"
    model_path = tmp_path / "model.json"
    code = main(["gen", "--config", cfg, "--out", str(tasks_path), "--model-spec", str(model_path)])
    assert code == 0
    return tasks_path, model_path


class TestGen:
    def test_writes_expected_line_count(self, tmp_path):
        tasks_path, model_path = run_gen(tmp_path)
        assert len(tasks_path.read_text().splitlines()) == 3
        spec = json.loads(model_path.read_text())
        assert spec["kind"] == "ngram_gen"

    def test_rerun_is_byte_identical(self, tmp_path):
        a, _ = run_gen(tmp_path)
        first = a.read_bytes()
        b, _ = run_gen(tmp_path)
        assert b.read_bytes() == first

    def test_bad_mask_ratio_exits_2_naming_field(self, tmp_path, capsys):
        cfg = write_config(tmp_path, dict(GEN_CONFIG, mask_ratio_list=[1.5]))
        code = main(["gen", "--config", cfg, "--out", str(tmp_path / "t.jsonl")])
        assert code == 2
        assert "mask_ratio" in capsys.readouterr().err

    def test_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path, GEN_CONFIG)
        out = tmp_path / "more.jsonl"
        code = main(["gen", "--config", cfg, "--n-tasks", "5", "--out", str(out)])
        assert code == 0
        assert len(out.read_text().splitlines()) == 5


class TestSuggest:
    def test_one_result_per_task_order_preserved(self, tmp_path):
        tasks_path, model_path = run_gen(tmp_path)
        out = tmp_path / "results.jsonl"
        code = main(
            [
                "suggest",
                "--tasks", str(tasks_path),
                "--model-spec", str(model_path),
                "--decoder", "psgd",
                "--beam-width", "3",
                "--out", str(out),
            ]
        )
        assert code == 0
        rows = read_results_jsonl(out)
        tasks = read_tasks_jsonl(tasks_path)
        assert [r.task_id for r in rows] == [t.task_id for t in tasks]
        assert all(r.error is None for r in rows)

    def test_end_to_end_pinned_golden(self, tmp_path):
        tasks_path, model_path = run_gen(tmp_path)
        out = tmp_path / "results.jsonl"
        code = main(
            [
                "suggest",
                "--tasks", str(tasks_path),
                "--model-spec", str(model_path),
                "--decoder", "psgd",
                "--beam-width", "3",
                "--out", str(out),
            ]
        )
        assert code == 0
        got = []
        for line in out.read_text().splitlines():
            d = json.loads(line)
            d.pop("wall_time_us")
            got.append(d)
        want = [
            {"decoder": "psgd", "emitted_steps": 7, "forward_passes": 19, "positions_scored": 139,
             "score": -0.6455265772360601, "span": [10, 11], "stop_reason": "patience", "task_id": "r0.40_n0000"},
            {"decoder": "psgd", "emitted_steps": 7, "forward_passes": 19, "positions_scored": 158,
             "score": -0.6796347132331934, "span": [10, 2], "stop_reason": "patience", "task_id": "r0.40_n0001"},
            {"decoder": "psgd", "emitted_steps": 11, "forward_passes": 31, "positions_scored": 444,
             "score": -0.8660605597929466, "span": [10, 6, 3, 10, 2, 9], "stop_reason": "patience", "task_id": "r0.40_n0002"},
        ]
        assert got == want

    def test_unsatisfiable_recorded_inline(self, tmp_path):
        tasks_path, model_path = run_gen(tmp_path)
        out = tmp_path / "results.jsonl"
        code = main(
            [
                "suggest",
                "--tasks", str(tasks_path),
                "--model-spec", str(model_path),
                "--decoder", "dba",
                "--beam-width", "1",
                "--max-span-len", "1",
                "--out", str(out),
            ]
        )
        assert code == 0
        assert out.exists()

    def test_missing_task_file_exits_2(self, tmp_path, capsys):
        _, model_path = run_gen(tmp_path)
        code = main(
            ["suggest", "--tasks", str(tmp_path / "nope.jsonl"), "--model-spec", str(model_path), "--out", str(tmp_path / "o")]
        )
        assert code == 2


class TestEval:
    def test_identity_suggestions_score_100(self, tmp_path):
        tasks_path, model_path = run_gen(tmp_path)
        tasks = read_tasks_jsonl(tasks_path)
        rows = [
            ResultRow(t.task_id, "psgd", t.gold_span.tokens, -1.0, 4, 9, 2, "patience", 10)
            for t in tasks
        ]
        results_path = tmp_path / "results.jsonl"
        write_results_jsonl(results_path, rows)
        out = tmp_path / "metrics.csv"
        code = main(["eval", "--tasks", str(tasks_path), "--results", str(results_path), "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("decoder,mask_ratio,bleu")
        assert lines[1].split(",")[2] == "100.0000"

    def test_unknown_task_id_exits_1(self, tmp_path, capsys):
        tasks_path, model_path = run_gen(tmp_path)
        results_path = tmp_path / "results.jsonl"
        write_results_jsonl(
            results_path, [ResultRow("ghost", "psgd", (), 0.0, 0, 0, 0, "max_len", 0)]
        )
        code = main(["eval", "--tasks", str(tasks_path), "--results", str(results_path), "--out", str(tmp_path / "m.csv")])
        assert code == 1
        assert "ghost" in capsys.readouterr().err


class TestSweeps:
    def test_sweep_pt_writes_csv(self, tmp_path):
        cfg = write_config(tmp_path, SWEEP_CONFIG)
        out = tmp_path / "metrics.csv"
        code = main(["sweep-pt", "--config", cfg, "--out", str(out), "--timing"])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("decoder,mask_ratio")
        assert len(lines) == 2  # one pt value, one ratio

    def test_sweep_ratio_writes_csv_and_results(self, tmp_path):
        cfg = write_config(tmp_path, SWEEP_CONFIG)
        out = tmp_path / "metrics.csv"
        results = tmp_path / "rows.jsonl"
        code = main(
            ["sweep-ratio", "--config", cfg, "--out", str(out), "--results-out", str(results), "--timing"]
        )
        assert code == 0
        assert len(out.read_text().splitlines()) == 3  # header + psgd + dba
        assert len(results.read_text().splitlines()) == 6  # 3 tasks x 2 decoders

    def test_missing_config_exits_2(self, tmp_path):
        code = main(["sweep-pt", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path / "m.csv")])
        assert code == 2


def mask_wall(lines):
    out = []
    for line in lines:
        d = json.loads(line)
        d.pop("wall_time_us", None)
        out.append(json.dumps(d, sort_keys=True))
    return out


def test_pipeline_determinism_end_to_end(tmp_path):
    """gen -> suggest -> eval twice: byte-identical outputs, timing masked."""
    snapshots = []
    for run in ("one", "two"):
        d = tmp_path / run
        d.mkdir()
        cfg = write_config(d, GEN_CONFIG)
        tasks = d / "tasks.jsonl"
        model = d / "model.json"
        results = d / "results.jsonl"
        metrics = d / "metrics.csv"
        assert main(["gen", "--config", cfg, "--out", str(tasks), "--model-spec", str(model)]) == 0
        assert main(
            ["suggest", "--tasks", str(tasks), "--model-spec", str(model), "--decoder", "psgd", "--out", str(results)]
        ) == 0
        assert main(["eval", "--tasks", str(tasks), "--results", str(results), "--out", str(metrics)]) == 0
        header, *rows = metrics.read_text().splitlines()
        keep = [i for i, name in enumerate(header.split(",")) if name != "mean_wall_time_us"]
        masked_csv = [",".join(line.split(",")[i] for i in keep) for line in rows]
        snapshots.append(
            (tasks.read_bytes(), model.read_bytes(), mask_wall(results.read_text().splitlines()), masked_csv)
        )
    assert snapshots[0] == snapshots[1]
