"""End-to-end CLI flows in a temp directory, plus exit-code contracts."""

import json

import pytest

from synergraph.cli import run


def cli(tmp_path, *args):
    return run([str(a) for a in args])


def test_usage_error_exits_2():
    assert run(["no-such-command"]) == 2
    assert run([]) == 2


def test_gradcheck_exits_zero():
    assert run(["gradcheck"]) == 0


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"not_a_key": 1}))
    code = run(["train", "--config", str(cfg), "--dataset", "synthetic"])
    assert code == 2
    assert "unknown config key" in capsys.readouterr().err


def test_missing_dataset_is_runtime_error(tmp_path, capsys):
    code = run(["train", "--dataset", str(tmp_path / "nope"), "--out", str(tmp_path / "runs")])
    assert code == 1


def test_bad_modality_is_usage_error(tmp_path, capsys):
    code = run(["train", "--dataset", "synthetic", "--modalities", "audio",
                "--out", str(tmp_path / "runs")])
    assert code == 2
    assert "unknown modality" in capsys.readouterr().err


def test_thread_cap_env_applied(tmp_path, monkeypatch):
    monkeypatch.setenv("SYNERGRAPH_THREADS", "1")
    assert run(["gradcheck"]) == 0


def test_synth_train_evaluate_compare_flow(tmp_path, capsys):
    data_dir = tmp_path / "data" / "synthetic"
    out = tmp_path / "runs"
    assert run(["synth", "--users", "40", "--items", "30", "--edges-per-user", "8",
                "--dv", "6", "--dt", "6", "--seed", "3", "--out", str(data_dir)]) == 0
    assert (data_dir / "interactions.tsv").exists()
    assert (data_dir / "features_visual.sgfm").exists()
    assert (data_dir / "item_vocab.tsv").exists()

    assert run(["train", "--dataset", str(data_dir), "--out", str(out),
                "--name", "runA", "--epochs", "4", "--top-k", "5",
                "--batch-size", "64", "--seed", "5"]) == 0
    run_dir = out / "runA"
    for f in ("checkpoint.sgck", "history.jsonl", "report.json",
              "config.resolved.json", "per_user_test.csv"):
        assert (run_dir / f).exists(), f

    report = json.loads((run_dir / "report.json").read_text())
    assert report["split"] == "test"
    assert set(report) == {"model", "dataset", "seed", "k", "split",
                           "recall", "ndcg", "n_users"}

    assert run(["evaluate", "--run", str(run_dir), "--split", "test"]) == 0
    re_report = json.loads((run_dir / "report_test_k20.json").read_text())
    assert re_report["recall"] == pytest.approx(report["recall"], abs=1e-6)

    assert run(["baseline", "--model", "bprmf", "--dataset", str(data_dir),
                "--out", str(out), "--name", "runB", "--epochs", "4",
                "--batch-size", "64", "--seed", "5"]) == 0
    capsys.readouterr()
    assert run(["compare", str(run_dir), str(out / "runB"), "--n-boot", "500"]) == 0
    out_text = capsys.readouterr().out
    payload = json.loads(out_text[out_text.index("{"):])
    assert 0.0 <= payload["p_recall"] <= 1.0


def test_itemknn_baseline_flow(tmp_path):
    data_dir = tmp_path / "data" / "synthetic"
    out = tmp_path / "runs"
    assert run(["synth", "--users", "30", "--items", "25", "--edges-per-user", "6",
                "--seed", "2", "--out", str(data_dir)]) == 0
    assert run(["baseline", "--model", "itemknn", "--dataset", str(data_dir),
                "--out", str(out), "--name", "knn"]) == 0
    report = json.loads((out / "knn" / "report.json").read_text())
    assert report["model"] == "itemknn"


def test_train_reproducible_from_resolved_config(tmp_path):
    out = tmp_path / "runs"
    assert run(["train", "--dataset", "synthetic", "--out", str(out),
                "--name", "r1", "--epochs", "3", "--batch-size", "128"]) == 0
    resolved = out / "r1" / "config.resolved.json"
    saved = json.loads(resolved.read_text())
    cfg2 = {k: v for k, v in saved.items() if k not in ("dataset", "top_k", "run")}
    cfg_path = tmp_path / "replay.json"
    cfg_path.write_text(json.dumps(cfg2))
    assert run(["train", "--dataset", "synthetic", "--out", str(out),
                "--name", "r2", "--config", str(cfg_path)]) == 0
    h1 = (out / "r1" / "history.jsonl").read_text()
    h2 = (out / "r2" / "history.jsonl").read_text()
    assert h1 == h2
    r1 = json.loads((out / "r1" / "report.json").read_text())
    r2 = json.loads((out / "r2" / "report.json").read_text())
    assert r1["recall"] == r2["recall"]


def test_modality_flag_restricts_model(tmp_path):
    out = tmp_path / "runs"
    assert run(["train", "--dataset", "synthetic", "--out", str(out),
                "--name", "tonly", "--epochs", "2", "--modalities", "t",
                "--batch-size", "128"]) == 0
    resolved = json.loads((out / "tonly" / "config.resolved.json").read_text())
    assert resolved["modalities"] == ["textual"]


def test_sweep_topk_writes_csv(tmp_path, capsys):
    out = tmp_path / "runs"
    assert run(["sweep-topk", "--dataset", "synthetic", "--out", str(out),
                "--values", "3,6", "--epochs", "2", "--batch-size", "256"]) == 0
    lines = (out / "topk_sweep.csv").read_text().strip().splitlines()
    assert lines[0] == "top_k,recall@20,ndcg@20"
    assert [l.split(",")[0] for l in lines[1:]] == ["3", "6"]
    assert "best K=" in capsys.readouterr().out


def test_ablate_covers_all_variants(tmp_path):
    out = tmp_path / "runs"
    assert run(["ablate", "--dataset", "synthetic", "--out", str(out),
                "--epochs", "2", "--batch-size", "256", "--top-k", "6"]) == 0
    lines = (out / "ablation.csv").read_text().strip().splitlines()
    assert [l.split(",")[0] for l in lines[1:]] == ["no-mp", "no-iiv", "no-circle", "none"]


def test_modality_ablate_covers_all_variants(tmp_path):
    out = tmp_path / "runs"
    assert run(["modality-ablate", "--dataset", "synthetic", "--out", str(out),
                "--epochs", "2", "--batch-size", "256", "--top-k", "6"]) == 0
    lines = (out / "modality_ablation.csv").read_text().strip().splitlines()
    assert [l.split(",")[0] for l in lines[1:]] == ["visual", "textual", "visual+textual"]


def test_vocab_export(tmp_path):
    inter = tmp_path / "interactions.tsv"
    inter.write_text("ua\tix\t0\nub\tiy\t0\nua\tiy\t0\n")
    assert run(["vocab", str(inter)]) == 0
    vocab = dict(
        line.split("\t") for line in
        (tmp_path / "item_vocab.tsv").read_text().strip().splitlines()
    )
    assert vocab == {"ix": "0", "iy": "1"}
    assert (tmp_path / "user_vocab.tsv").exists()


def test_ablation_flag_roundtrip(tmp_path):
    out = tmp_path / "runs"
    assert run(["train", "--dataset", "synthetic", "--out", str(out),
                "--name", "nomp", "--epochs", "2", "--ablation", "no-mp",
                "--batch-size", "128"]) == 0
    resolved = json.loads((out / "nomp" / "config.resolved.json").read_text())
    assert resolved["ablation"] == "no-mp"
