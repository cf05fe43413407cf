#!/usr/bin/env python3
# The whole pipeline through the command-line entry points, no network:
# ingest precomputed embeddings, index, retrieve, generate, evaluate.
# Endpoint URLs with the stub: scheme are served in-process.

import json
import tempfile
from pathlib import Path

import numpy as np

from vrag.cli import main
from vrag.corpus import EmbeddingMatrix, write_embeddings
from vrag.vecmath import l2_normalize

root = Path(tempfile.mkdtemp(prefix="pipeline-demo-"))
print("workspace:", root)

# --- stage precomputed embeddings + sidecar metadata -------------------------
rng = np.random.default_rng(21)
dim, n = 16, 6
src = root / "precomputed"
src.mkdir()
targets = {}
for i in range(n):
    vid = f"howto{i:02d}"
    target = l2_normalize(rng.standard_normal(dim))
    targets[vid] = target
    frames = np.stack([l2_normalize(target + 0.05 * rng.standard_normal(dim))
                       for _ in range(8)])
    write_embeddings(EmbeddingMatrix(
        video_id=vid, modality="visual", dim=dim, count=8,
        values=frames.astype(np.float32),
        timestamps=np.arange(8, dtype=np.float32) * 2.0),
        src / f"{vid}.visual.vrem")
    write_embeddings(EmbeddingMatrix(
        video_id=vid, modality="text", dim=dim, count=1,
        values=target.astype(np.float32)[None, :]),
        src / f"{vid}.text.vrem")
    (src / f"{vid}.meta.json").write_text(json.dumps({
        "subtitle": f"first do step {i}, then check the result",
        "category": "howto"}))

corpus = root / "corpus"
config = root / "config.json"
config.write_text(json.dumps({"manifest_path": str(corpus / "manifest.json"),
                              "alpha": 0.6, "seed": 5}))

queries = root / "queries.jsonl"
rows = []
for i, (vid, target) in enumerate(sorted(targets.items())):
    rows.append({"query_id": f"q{i}", "question": f"how do I finish task {i}?",
                 "query_vec": [float(x) for x in target], "truth_video_id": vid,
                 "answer": f"how do I finish task {i}?"})
queries.write_text("\n".join(json.dumps(r) for r in rows) + "\n")

# --- run each stage -----------------------------------------------------------
out = root / "run"
for argv in (
    ["ingest", "--config", str(config), "--out", str(corpus), "--precomputed", str(src)],
    ["index", "--config", str(config), "--out", str(out)],
    ["retrieve", "--config", str(config), "--queries", str(queries),
     "--index", str(out / "index.vidx"), "--out", str(out)],
    ["generate", "--config", str(config), "--queries", str(queries),
     "--results", str(out / "results.jsonl"), "--out", str(out)],
    ["eval", "--config", str(config), "--answers", str(out / "answers.jsonl"),
     "--truth", str(queries), "--out", str(out)],
):
    print()
    print("$ vrag " + " ".join(argv))
    rc = main(argv)
    assert rc == 0, rc

print()
print("files written:")
for p in sorted(out.rglob("*")):
    if p.is_file():
        print(f"  {p.relative_to(root)}  ({p.stat().st_size} bytes)")

report = json.loads((out / "report.json").read_text())
print()
print("report aggregates:", report["aggregates"])
