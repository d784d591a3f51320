import json

import numpy as np
import pytest

from opguide.cli import main


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    """gen-demo -> segment -> learn, once for the module."""
    root = tmp_path_factory.mktemp("pipeline")
    demos = root / "demos"
    segs = root / "segments"
    model = root / "model"
    assert main(["gen-demo", "--out", str(demos), "--demos", "3",
                 "--cycles", "3", "--noise", "0.01", "--seed", "7"]) == 0
    assert main(["segment", "--demos", str(demos), "--out", str(segs),
                 "--seed", "7"]) == 0
    assert main(["learn", "--segments", str(segs),
                 "--task", str(demos / "task.json"), "--out", str(model)]) == 0
    return root


def test_gen_demo_artifacts(pipeline_dir):
    demos = pipeline_dir / "demos"
    assert (demos / "task.json").exists()
    for i in range(3):
        assert (demos / f"demo_{i}.jsonl").exists()
        oracle = json.loads((demos / f"oracle_{i}.json").read_text())
        assert oracle["cycles"] == 3
        assert len(oracle["events"]) == 6  # scoop+dump per cycle


def test_segment_artifacts(pipeline_dir):
    segs = pipeline_dir / "segments"
    assert (segs / "clusters.json").exists()
    lines = (segs / "segments_0.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    assert set(rec) >= {"primitive_id", "e", "start", "end", "s"}
    assert len(rec["e"]) == 4 and len(rec["s"]) == 4


def test_learn_artifacts_reloadable(pipeline_dir):
    model_dir = pipeline_dir / "model"
    doc = json.loads((model_dir / "policy.json").read_text())
    assert doc["subgoals_ref"] == "subgoals.json"
    assert "clusters" in doc
    rows = np.array(doc["Pi"])
    assert np.abs(rows.sum(axis=1) - 1).max() < 1e-9
    sg = json.loads((model_dir / "subgoals.json").read_text())
    assert all(len(e["mu"]) == 4 and len(e["sigma"]) == 16
               for e in sg["subgoals"])


def test_eval_writes_metrics(pipeline_dir, tmp_path):
    out = tmp_path / "metrics.json"
    rc = main([
        "eval", "--replay", str(pipeline_dir / "demos" / "demo_0.jsonl"),
        "--model", str(pipeline_dir / "model" / "policy.json"),
        "--task", str(pipeline_dir / "demos" / "task.json"),
        "--out", str(out),
    ])
    assert rc == 0
    metrics = json.loads(out.read_text())
    assert len(metrics["cycle_times"]) == 3
    assert metrics["erroneous_actions_per_cycle"] == [0, 0, 0]


def test_segment_missing_demos_fails_with_stage(tmp_path, capsys):
    rc = main(["segment", "--demos", str(tmp_path), "--out", str(tmp_path / "o")])
    assert rc == 2
    err = capsys.readouterr().err
    assert "segment" in err


def test_segment_malformed_file_fails(tmp_path, capsys):
    (tmp_path / "task.json").write_text("{}")
    (tmp_path / "demo_0.jsonl").write_text("not json\n")
    rc = main(["segment", "--demos", str(tmp_path), "--out", str(tmp_path / "o")])
    assert rc == 2


def test_eval_unreadable_model_fails(pipeline_dir, tmp_path, capsys):
    rc = main([
        "eval", "--replay", str(pipeline_dir / "demos" / "demo_0.jsonl"),
        "--model", str(tmp_path / "missing.json"),
        "--task", str(pipeline_dir / "demos" / "task.json"),
        "--out", str(tmp_path / "m.json"),
    ])
    assert rc == 2


def test_bench_scaling_csv(tmp_path):
    out = tmp_path / "bench.csv"
    rc = main(["bench", "--sizes", "2000,4000", "--out", str(out), "--seed", "1"])
    assert rc == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "frames,seconds"
    assert len(rows) == 3


def test_bench_bnirl_report(tmp_path):
    out = tmp_path / "report.json"
    rc = main(["bench", "bnirl", "--iters", "400", "--burn-in", "150",
               "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["adjusted_rand_index"] >= 0.9


def test_csv_format_pipeline(tmp_path):
    demos = tmp_path / "demos"
    segs = tmp_path / "segs"
    assert main(["gen-demo", "--out", str(demos), "--demos", "1",
                 "--cycles", "2", "--noise", "0", "--format", "csv"]) == 0
    assert (demos / "demo_0.csv").exists()
    assert main(["segment", "--demos", str(demos), "--out", str(segs),
                 "--format", "csv"]) == 0


def test_help_documents_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["segment", "--help"])
    out = capsys.readouterr().out
    assert "--eta" in out and "--min-len" in out
