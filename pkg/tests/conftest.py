"""Shared fixtures: synthetic corpora on disk and in memory."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from vrag.corpus import CorpusManifest, EmbeddingMatrix, VideoRecord, write_embeddings
from vrag.vecmath import l2_normalize


def unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    rows = rng.standard_normal((n, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def build_corpus_dir(root: Path, n_videos: int = 5, frames: int = 9, dim: int = 16,
                     seed: int = 7, with_text: bool = True,
                     with_subtitles: bool = True) -> dict:
    """Write a precomputed corpus under root and return its handles.

    Each video's frames are small perturbations of one unit target vector;
    the text embedding is the target itself, so retrieval with the target
    as query is exact. Returns manifest, paths, and the per-video targets.
    """
    emb_dir = root / "embeddings"
    emb_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    records = []
    targets = {}
    for i in range(n_videos):
        vid = f"vid{i:02d}"
        target = l2_normalize(rng.standard_normal(dim))
        targets[vid] = target
        rows = np.stack([l2_normalize(target + 0.05 * rng.standard_normal(dim))
                         for _ in range(frames)])
        ts = np.arange(frames, dtype=np.float32) * 2.0 + 0.5
        write_embeddings(
            EmbeddingMatrix(video_id=vid, modality="visual", dim=dim, count=frames,
                            values=rows.astype(np.float32), timestamps=ts),
            emb_dir / f"{vid}.visual.vrem")
        if with_text:
            write_embeddings(
                EmbeddingMatrix(video_id=vid, modality="text", dim=dim, count=1,
                                values=target.astype(np.float32)[None, :]),
                emb_dir / f"{vid}.text.vrem")
        records.append(VideoRecord(
            video_id=vid, source_path=f"/media/{vid}.mp4", duration_s=frames * 2.0,
            frame_count=frames,
            subtitle=f"clip {i} shows someone doing task {i}" if with_subtitles else None,
            category="even" if i % 2 == 0 else "odd"))
    manifest = CorpusManifest(corpus_id="testcorpus", encoder_id="precomputed",
                              embedding_dim=dim, embedding_dir=str(emb_dir),
                              videos=records)
    return {"manifest": manifest, "embedding_dir": emb_dir, "targets": targets,
            "dim": dim, "frames": frames}


@pytest.fixture
def corpus(tmp_path):
    return build_corpus_dir(tmp_path / "corpus")


@pytest.fixture
def queries_file(tmp_path, corpus):
    """Queries whose vectors are the per-video targets (exact retrieval)."""
    rows = []
    for i, (vid, target) in enumerate(sorted(corpus["targets"].items())):
        rows.append({"query_id": f"q{i}", "question": f"what happens in clip {i}?",
                     "query_vec": [float(x) for x in target],
                     "truth_video_id": vid,
                     "answer": f"what happens in clip {i}?",
                     "category": "even" if i % 2 == 0 else "odd"})
    path = tmp_path / "queries.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One verdict line per acceptance criterion, when that module ran."""
    import sys

    for name, mod in sys.modules.items():
        if name.rpartition(".")[2] == "test_acceptance" and hasattr(mod, "RESULTS"):
            if mod.RESULTS:
                terminalreporter.write_sep("-", "acceptance criteria")
                for label, status, elapsed in mod.RESULTS:
                    terminalreporter.write_line(f"[{status}] {label} ({elapsed:.2f}s)")
            break
