from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from conftest import build_corpus_dir
from vrag.cli import load_queries, main
from vrag.corpus import save_manifest
from vrag.errors import ValidationError


@pytest.fixture
def workspace(tmp_path):
    """Precomputed .vrem source dir + config + queries, ready for the CLI."""
    handles = build_corpus_dir(tmp_path / "staging")
    src = tmp_path / "pre"
    src.mkdir()
    for f in handles["embedding_dir"].iterdir():
        (src / f.name).write_bytes(f.read_bytes())
    for i, rec in enumerate(handles["manifest"].videos):
        (src / f"{rec.video_id}.meta.json").write_text(json.dumps({
            "subtitle": rec.subtitle, "category": rec.category,
            "duration_s": rec.duration_s}))
    out = tmp_path / "out"
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "manifest_path": str(out / "manifest.json"),
        "alpha": 0.6, "seed": 3,
        "generation": {"frames_per_video": 3, "candidates": 6, "n_subsets": 10},
    }))
    rows = []
    for i, (vid, target) in enumerate(sorted(handles["targets"].items())):
        rows.append({"query_id": f"q{i}", "question": f"what happens in clip {i}?",
                     "query_vec": [float(x) for x in target], "truth_video_id": vid,
                     "answer": f"what happens in clip {i}?",
                     "category": "even" if i % 2 == 0 else "odd"})
    queries = tmp_path / "queries.jsonl"
    queries.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return {"src": src, "out": out, "config": config, "queries": queries,
            "tmp": tmp_path, "handles": handles}


def _ingest(ws):
    rc = main(["ingest", "--config", str(ws["config"]), "--out", str(ws["out"]),
               "--precomputed", str(ws["src"])])
    assert rc == 0


def test_ingest_precomputed_builds_manifest(workspace):
    _ingest(workspace)
    manifest = json.loads((workspace["out"] / "manifest.json").read_text())
    assert manifest["encoder_id"] == "precomputed"
    assert manifest["embedding_dim"] == 16
    assert len(manifest["videos"]) == 5
    assert manifest["videos"][0]["subtitle"].startswith("clip 0")
    assert (workspace["out"] / "embeddings" / "vid00.visual.vrem").is_file()


def test_ingest_media_dir_via_stub_encoder(workspace, tmp_path):
    media = tmp_path / "media"
    media.mkdir()
    for i in range(2):
        (media / f"clip{i}.mp4").write_bytes(b"fake" + bytes([i]))
    (media / "clip0.txt").write_text("pouring coffee")
    out2 = tmp_path / "out2"
    rc = main(["ingest", "--config", str(workspace["config"]), "--out", str(out2),
               "--media-dir", str(media), "--transcribe"])
    assert rc == 0
    manifest = json.loads((out2 / "manifest.json").read_text())
    assert manifest["encoder_id"] == "stub-encoder"
    assert manifest["embedding_dim"] == 64
    byid = {v["video_id"]: v for v in manifest["videos"]}
    assert byid["clip0"]["subtitle"] == "pouring coffee"
    assert byid["clip1"]["aux_transcript"]
    assert (out2 / "embeddings" / "clip0.text.vrem").is_file()


def test_index_and_retrieve(workspace, capsys):
    _ingest(workspace)
    rc = main(["index", "--config", str(workspace["config"]), "--out", str(workspace["out"])])
    assert rc == 0
    assert (workspace["out"] / "index.vidx").is_file()
    rc = main(["retrieve", "--config", str(workspace["config"]),
               "--out", str(workspace["out"]), "--queries", str(workspace["queries"]),
               "--index", str(workspace["out"] / "index.vidx")])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "R@1 1.0000" in printed
    lines = (workspace["out"] / "results.jsonl").read_text().splitlines()
    assert len(lines) == 5
    first = json.loads(lines[0])
    assert first["query_id"] == "q0"
    assert first["ranked"][0]["video_id"] == "vid00"
    summary = json.loads((workspace["out"] / "retrieve_summary.json").read_text())
    assert summary["r_at_1"] == 1.0


def test_retrieve_without_prebuilt_index(workspace):
    _ingest(workspace)
    rc = main(["retrieve", "--config", str(workspace["config"]),
               "--out", str(workspace["out"]), "--queries", str(workspace["queries"])])
    assert rc == 0


def test_generate_and_eval(workspace, capsys):
    _ingest(workspace)
    main(["retrieve", "--config", str(workspace["config"]), "--out", str(workspace["out"]),
          "--queries", str(workspace["queries"])])
    rc = main(["generate", "--config", str(workspace["config"]), "--out", str(workspace["out"]),
               "--queries", str(workspace["queries"]),
               "--results", str(workspace["out"] / "results.jsonl")])
    assert rc == 0
    answers = [json.loads(l) for l in (workspace["out"] / "answers.jsonl").read_text().splitlines()]
    assert len(answers) == 5
    assert answers[0]["answer"] == "what happens in clip 0?"
    assert answers[0]["context_digest"]
    rc = main(["eval", "--config", str(workspace["config"]), "--out", str(workspace["out"]),
               "--answers", str(workspace["out"] / "answers.jsonl"),
               "--truth", str(workspace["queries"]), "--judge", "--group-by", "category"])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "ROUGE-L 100.00" in printed
    assert "BLEU-4 100.00" in printed
    assert "G-Eval" in printed
    report = json.loads((workspace["out"] / "report.json").read_text())
    assert report["aggregates"]["rouge_l"] == 1.0
    assert set(report["group_by"]) == {"even", "odd"}
    csv_lines = (workspace["out"] / "report.csv").read_text().splitlines()
    assert csv_lines[0] == "query_id,rouge_l,bleu_4,geval,category"
    assert len(csv_lines) == 6


def test_generate_video_plus_text_mode(workspace):
    _ingest(workspace)
    rc = main(["generate", "--config", str(workspace["config"]), "--out", str(workspace["out"]),
               "--queries", str(workspace["queries"]), "--mode", "video_plus_text"])
    assert rc == 0


def test_selector_train_and_adaptive_index(workspace):
    _ingest(workspace)
    pairs = workspace["tmp"] / "pairs.jsonl"
    rows = [json.loads(l) for l in workspace["queries"].read_text().splitlines()]
    pairs.write_text("\n".join(json.dumps({
        "query_id": r["query_id"], "video_id": r["truth_video_id"],
        "query_vec": r["query_vec"], "question": r["question"], "answer": r["answer"],
    }) for r in rows) + "\n")
    rc = main(["selector-train", "--config", str(workspace["config"]),
               "--out", str(workspace["out"]), "--pairs", str(pairs),
               "--mode", "retrieval", "--epochs", "10"])
    assert rc == 0
    model_path = workspace["out"] / "selector_retrieval.json"
    assert model_path.is_file()
    assert (workspace["out"] / "selector_examples.jsonl").is_file()
    trace = json.loads((workspace["out"] / "train_trace.json").read_text())
    assert trace["epochs"] == 10 and len(trace["loss"]) == 10

    cfg = json.loads(workspace["config"].read_text())
    cfg["selector"] = {"retrieval_path": str(model_path)}
    cfg2 = workspace["tmp"] / "config2.json"
    cfg2.write_text(json.dumps(cfg))
    rc = main(["index", "--config", str(cfg2), "--out", str(workspace["out"]),
               "--selector-mode", "adaptive"])
    assert rc == 0
    rc = main(["selector-select", "--config", str(cfg2), "--out", str(workspace["out"]),
               "--video", "vid00"])
    assert rc == 0
    sel = json.loads((workspace["out"] / "selection.json").read_text())
    assert sel["mode"] == "retrieval"
    assert len(sel["frame_indices"]) == 4
    assert sel["frame_indices"] == sorted(sel["frame_indices"])


def test_synthqa(workspace):
    _ingest(workspace)
    rc = main(["synthqa", "--config", str(workspace["config"]), "--out", str(workspace["out"]),
               "--videos", "vid00", "vid01"])
    assert rc == 0
    rows = [json.loads(l) for l in
            (workspace["out"] / "synthetic_qa.jsonl").read_text().splitlines()]
    assert len(rows) == 6
    assert all(r["origin"] == "synthetic" for r in rows)
    assert {r["source_video_id"] for r in rows} == {"vid00", "vid01"}


def test_sweep_alpha(workspace):
    _ingest(workspace)
    rc = main(["sweep-alpha", "--config", str(workspace["config"]),
               "--out", str(workspace["out"]), "--queries", str(workspace["queries"])])
    assert rc == 0
    lines = (workspace["out"] / "sweep_alpha.csv").read_text().splitlines()
    assert lines[0] == "alpha,r_at_1,r_at_5,r_at_10"
    assert len(lines) == 12
    assert lines[1].startswith("0.0,")
    assert lines[-1].startswith("1.0,")


def test_eval_compare(workspace):
    _ingest(workspace)
    pairs = workspace["tmp"] / "pairs.jsonl"
    rows = [json.loads(l) for l in workspace["queries"].read_text().splitlines()]
    pairs.write_text("\n".join(json.dumps({
        "query_id": r["query_id"], "video_id": r["truth_video_id"],
        "query_vec": r["query_vec"], "question": r["question"], "answer": r["answer"],
    }) for r in rows) + "\n")
    main(["selector-train", "--config", str(workspace["config"]),
          "--out", str(workspace["out"]), "--pairs", str(pairs),
          "--mode", "retrieval", "--epochs", "5"])
    cfg = json.loads(workspace["config"].read_text())
    cfg["selector"] = {"retrieval_path": str(workspace["out"] / "selector_retrieval.json")}
    cfg2 = workspace["tmp"] / "config2.json"
    cfg2.write_text(json.dumps(cfg))
    rc = main(["eval", "--config", str(cfg2), "--out", str(workspace["out"]),
               "--compare", "uniform,adaptive", "--queries", str(workspace["queries"])])
    assert rc == 0
    lines = (workspace["out"] / "comparison.csv").read_text().splitlines()
    assert lines[0] == "method,r_at_1,rouge_l,bleu_4"
    assert lines[1].startswith("uniform,")
    assert lines[2].startswith("adaptive,")


def test_env_config_fallback(workspace, monkeypatch):
    _ingest(workspace)
    monkeypatch.setenv("VRAG_CONFIG", str(workspace["config"]))
    rc = main(["index", "--out", str(workspace["out"])])
    assert rc == 0


def test_exit_code_validation_error(workspace, capsys):
    rc = main(["index", "--config", str(workspace["config"]), "--out", str(workspace["out"])])
    assert rc == 1  # manifest not ingested yet -> MissingFile
    assert "error:" in capsys.readouterr().err


def test_exit_code_corruption(workspace, capsys):
    _ingest(workspace)
    vrem = workspace["out"] / "embeddings" / "vid00.visual.vrem"
    vrem.write_bytes(b"GARBAGE" + b"\x00" * 30)
    rc = main(["index", "--config", str(workspace["config"]), "--out", str(workspace["out"])])
    assert rc == 3
    assert "vid00" in capsys.readouterr().err


def test_exit_code_transport(workspace, tmp_path, capsys):
    _ingest(workspace)
    # nothing listens on the discard port, so the generator call fails fast
    cfg = json.loads(workspace["config"].read_text())
    cfg["endpoints"] = {"generator_url": "http://127.0.0.1:9", "encoder_url": "stub:encoder",
                        "generator_model": "m"}
    cfg2 = tmp_path / "config_dead.json"
    cfg2.write_text(json.dumps(cfg))
    rc = main(["generate", "--config", str(cfg2), "--out", str(workspace["out"]),
               "--queries", str(workspace["queries"])])
    assert rc == 2


def test_usage_error_exits_one(workspace):
    with pytest.raises(SystemExit) as err:
        main(["retrieve", "--config", str(workspace["config"])])  # --out missing
    assert err.value.code == 1


def test_unknown_command_exits_one():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 1


def test_load_queries_validation(tmp_path):
    path = tmp_path / "queries.jsonl"
    path.write_text('{"query_id": "a"}\n{"query_id": "a"}\n')
    with pytest.raises(ValidationError):
        load_queries(path)
    path.write_text('{"question": "no id"}\n')
    with pytest.raises(ValidationError):
        load_queries(path)
