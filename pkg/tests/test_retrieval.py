from __future__ import annotations

import numpy as np
import pytest

from vrag.corpus import EmbeddingMatrix
from vrag.errors import (
    DimMismatch,
    EmptyIndex,
    MissingTextEmbedding,
    MissingTruth,
    SchemaViolation,
    TruncatedFile,
    ZeroVector,
)
from vrag.retrieval import (
    IndexEntry,
    VideoIndex,
    build_index,
    embed_video_repr,
    load_index,
    load_results,
    recall_at_k,
    retrieve_topk,
    save_index,
    save_results,
    uniform_stride_indices,
)
from vrag.vecmath import l2_normalize


def _visual(vid="v", frames=6, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((frames, dim)).astype(np.float32)
    return EmbeddingMatrix(video_id=vid, modality="visual", dim=dim,
                           count=frames, values=rows)


def test_uniform_stride():
    assert uniform_stride_indices(3, 4) == [0, 1, 2]
    assert uniform_stride_indices(4, 4) == [0, 1, 2, 3]
    assert uniform_stride_indices(8, 4) == [0, 2, 5, 7]
    assert uniform_stride_indices(64, 4) == [0, 21, 42, 63]
    out = uniform_stride_indices(100, 7)
    assert out == sorted(set(out))
    assert out[0] == 0 and out[-1] == 99


def test_embed_video_repr_visual_only():
    visual = _visual()
    entry = embed_video_repr(None, visual, text=None, alpha=0.0)
    assert np.array_equal(entry.ensemble_repr, entry.visual_repr)
    assert entry.text_repr is None
    assert abs(np.linalg.norm(entry.ensemble_repr) - 1.0) < 1e-9


def test_embed_video_repr_requires_text_when_alpha_positive():
    with pytest.raises(MissingTextEmbedding):
        embed_video_repr(None, _visual(), text=None, alpha=0.5)


def test_embed_video_repr_alpha_endpoints():
    visual = _visual()
    text = l2_normalize(np.ones(4))
    e1 = embed_video_repr(None, visual, text=text, alpha=1.0)
    assert np.allclose(e1.ensemble_repr, text, atol=1e-12)
    e0 = embed_video_repr(None, visual, text=text, alpha=0.0)
    assert np.allclose(e0.ensemble_repr, e0.visual_repr, atol=1e-12)


def test_build_index_order_and_dim_guard(corpus):
    manifest = corpus["manifest"]
    index = build_index(manifest, alpha=0.6, seed=0)
    assert [e.video_id for e in index.entries] == [v.video_id for v in manifest.videos]
    assert index.dim == manifest.embedding_dim
    manifest.embedding_dim = 999
    with pytest.raises(SchemaViolation) as err:
        build_index(manifest, alpha=0.6, seed=0)
    assert "vid00" in str(err.value)


def test_retrieve_ranks_planted_target(corpus):
    index = build_index(corpus["manifest"], alpha=0.6, seed=0)
    for vid, target in corpus["targets"].items():
        result = retrieve_topk(index, target, k=3, query_id=f"find-{vid}")
        assert result.ranked[0][0] == vid
        assert len(result.ranked) == 3
        scores = [s for _, s in result.ranked]
        assert scores == sorted(scores, reverse=True)


def test_retrieve_tie_breaks_by_id():
    v = l2_normalize(np.array([1.0, 0.0]))
    entries = [IndexEntry(video_id=name, ensemble_repr=v, visual_repr=v, text_repr=None)
               for name in ("zeta", "alpha", "mid")]
    index = VideoIndex(corpus_id="c", alpha=0.0, dim=2, entries=entries)
    result = retrieve_topk(index, v, k=3)
    assert [vid for vid, _ in result.ranked] == ["alpha", "mid", "zeta"]


def test_retrieve_k_capped_at_corpus_size():
    v = l2_normalize(np.array([1.0, 0.0]))
    entries = [IndexEntry(video_id="only", ensemble_repr=v, visual_repr=v, text_repr=None)]
    index = VideoIndex(corpus_id="c", alpha=0.0, dim=2, entries=entries)
    assert len(retrieve_topk(index, v, k=10).ranked) == 1


def test_retrieve_guards():
    index = VideoIndex(corpus_id="c", alpha=0.0, dim=2, entries=[])
    with pytest.raises(EmptyIndex):
        retrieve_topk(index, np.ones(2))
    v = l2_normalize(np.array([1.0, 0.0]))
    index = VideoIndex(corpus_id="c", alpha=0.0, dim=2, entries=[
        IndexEntry(video_id="a", ensemble_repr=v, visual_repr=v, text_repr=None)])
    with pytest.raises(DimMismatch):
        retrieve_topk(index, np.ones(3))
    with pytest.raises(ZeroVector):
        retrieve_topk(index, np.zeros(2))


def test_recall_at_k():
    from vrag.retrieval import RetrievalResult
    results = [
        RetrievalResult(query_id="q0", ranked=[("a", 0.9), ("b", 0.8)], k=2),
        RetrievalResult(query_id="q1", ranked=[("b", 0.9), ("c", 0.8)], k=2),
    ]
    truth = {"q0": "a", "q1": "c"}
    assert recall_at_k(results, truth, 1) == 0.5
    assert recall_at_k(results, truth, 2) == 1.0
    with pytest.raises(MissingTruth):
        recall_at_k(results, {"q0": "a"}, 1)


def test_index_round_trip(tmp_path, corpus):
    index = build_index(corpus["manifest"], alpha=0.7, seed=0)
    path = tmp_path / "index.vidx"
    save_index(index, path)
    loaded = load_index(path)
    assert loaded.alpha == 0.7
    assert loaded.dim == index.dim
    assert [e.video_id for e in loaded.entries] == [e.video_id for e in index.entries]
    # float32 storage, renormalized on load: same ranking behavior
    for vid, target in corpus["targets"].items():
        a = retrieve_topk(index, target, k=5).ranked
        b = retrieve_topk(loaded, target, k=5).ranked
        assert [x[0] for x in a] == [x[0] for x in b]
    assert all(abs(np.linalg.norm(e.ensemble_repr) - 1.0) < 1e-9 for e in loaded.entries)


def test_index_save_deterministic_bytes(tmp_path, corpus):
    index = build_index(corpus["manifest"], alpha=0.5, seed=0)
    save_index(index, tmp_path / "a.vidx")
    save_index(index, tmp_path / "b.vidx")
    assert (tmp_path / "a.vidx").read_bytes() == (tmp_path / "b.vidx").read_bytes()


def test_index_truncated_file(tmp_path, corpus):
    index = build_index(corpus["manifest"], alpha=0.5, seed=0)
    path = tmp_path / "index.vidx"
    save_index(index, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-9])
    with pytest.raises(TruncatedFile):
        load_index(path)


def test_results_round_trip(tmp_path):
    from vrag.retrieval import RetrievalResult
    results = [RetrievalResult(query_id="q0", ranked=[("a", 0.875), ("b", 0.5)], k=2)]
    path = tmp_path / "results.jsonl"
    save_results(results, path)
    back = load_results(path)
    assert back[0].query_id == "q0"
    assert back[0].ranked == [("a", 0.875), ("b", 0.5)]
    assert back[0].k == 2
