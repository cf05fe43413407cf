"""Video-level representations, exact top-k ranking, and recall.

Each video gets a visual representation (mean of selected frame
embeddings, unit norm), optionally a text representation, and an ensemble
blend of the two. Queries are ranked against ensemble vectors with exact
cosine; no approximation.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import reduce_frames
from .corpus import CorpusManifest, EmbeddingMatrix, embedding_path, read_embeddings
from .errors import (
    BadMagic,
    DimMismatch,
    EmptyIndex,
    IoFailure,
    MissingFile,
    MissingTextEmbedding,
    MissingTruth,
    SchemaViolation,
    TruncatedFile,
    UnsupportedVersion,
    VragError,
    ZeroVector,
)
from .rng import derive_seed
from .selector import SelectorModel, select_frames
from .vecmath import interpolate_ensemble, l2_normalize, mean_pool

VIDX_MAGIC = b"VIDX"
VIDX_VERSION = 1
DEFAULT_ALPHA = 0.6
DEFAULT_FRAMES_PER_VIDEO = 4
DEFAULT_CANDIDATES = 8


@dataclass
class IndexEntry:
    video_id: str
    ensemble_repr: np.ndarray
    visual_repr: np.ndarray | None = None
    text_repr: np.ndarray | None = None


@dataclass
class VideoIndex:
    corpus_id: str
    alpha: float
    dim: int
    entries: list[IndexEntry] = field(default_factory=list)
    selector_mode: str = "uniform"
    frames_per_video: int = DEFAULT_FRAMES_PER_VIDEO


@dataclass
class RetrievalResult:
    query_id: str
    ranked: list[tuple[str, float]]
    k: int


def uniform_stride_indices(count: int, n: int) -> list[int]:
    """Evenly spaced frame indices; all of them when count <= n."""
    if count <= n:
        return list(range(count))
    return [int(i) for i in np.round(np.linspace(0, count - 1, n))]


def select_frame_indices(visual: EmbeddingMatrix, selector: SelectorModel | None,
                         frames_per_video: int, seed: int,
                         query=None, n_subsets: int | None = None,
                         candidates: int = DEFAULT_CANDIDATES) -> list[int]:
    """Frame indices used for a video's representation or context.

    Without a selector this is a uniform stride. With one, the frame set
    is first reduced to `candidates` cluster representatives, then the
    selector picks its subset among them; returned indices refer to the
    original frame numbering, sorted ascending.
    """
    count = visual.count
    if count <= frames_per_video:
        return list(range(count))
    if selector is None:
        return uniform_stride_indices(count, frames_per_video)
    reduced = reduce_frames(visual.values, candidates, seed)
    cand = visual.values.astype(np.float64)[reduced]
    chosen = select_frames(selector, cand, query=query, n_subsets=n_subsets,
                           seed=seed, video_id=visual.video_id)
    return sorted(reduced[i] for i in chosen.frame_indices)


def embed_video_repr(v, visual: EmbeddingMatrix, text=None,
                     selector: SelectorModel | None = None,
                     alpha: float = DEFAULT_ALPHA, seed: int = 0,
                     frames_per_video: int = DEFAULT_FRAMES_PER_VIDEO,
                     n_subsets: int | None = None,
                     candidates: int = DEFAULT_CANDIDATES) -> IndexEntry:
    """Build one index entry from a video's embeddings.

    text, when present, is a single embedding vector (or a 1-row matrix).
    With alpha > 0 a missing text embedding is an error; with alpha = 0
    the ensemble falls back to the visual representation alone.
    """
    if selector is not None:
        frames_per_video = selector.m
    idx = select_frame_indices(visual, selector, frames_per_video, seed,
                               n_subsets=n_subsets, candidates=candidates)
    visual_repr = l2_normalize(mean_pool(visual.values.astype(np.float64)[idx]))
    if text is None:
        if alpha > 0.0:
            raise MissingTextEmbedding(visual.video_id)
        return IndexEntry(video_id=visual.video_id, ensemble_repr=visual_repr,
                          visual_repr=visual_repr, text_repr=None)
    tvals = text.values if isinstance(text, EmbeddingMatrix) else np.asarray(text)
    text_repr = l2_normalize(np.asarray(tvals, dtype=np.float64).reshape(-1))
    ensemble = interpolate_ensemble(text_repr, visual_repr, alpha)
    return IndexEntry(video_id=visual.video_id, ensemble_repr=ensemble,
                      visual_repr=visual_repr, text_repr=text_repr)


def build_index(manifest: CorpusManifest, alpha: float = DEFAULT_ALPHA,
                selector: SelectorModel | None = None, seed: int = 0,
                frames_per_video: int = DEFAULT_FRAMES_PER_VIDEO,
                n_subsets: int | None = None,
                candidates: int = DEFAULT_CANDIDATES) -> VideoIndex:
    """Index every video in the manifest, preserving manifest order."""
    entries = []
    for rec in manifest.videos:
        try:
            visual = read_embeddings(embedding_path(manifest.embedding_dir, rec.video_id, "visual"))
            if visual.dim != manifest.embedding_dim:
                raise SchemaViolation(
                    "dim", f"visual dim {visual.dim} != manifest dim {manifest.embedding_dim}")
            text_path = embedding_path(manifest.embedding_dir, rec.video_id, "text")
            text = read_embeddings(text_path) if text_path.is_file() else None
            if text is not None and text.dim != manifest.embedding_dim:
                raise SchemaViolation(
                    "dim", f"text dim {text.dim} != manifest dim {manifest.embedding_dim}")
            entry = embed_video_repr(
                rec, visual, text, selector=selector, alpha=alpha,
                seed=derive_seed(seed, "index", rec.video_id),
                frames_per_video=frames_per_video, n_subsets=n_subsets,
                candidates=candidates)
        except VragError as exc:
            exc.args = (f"video '{rec.video_id}': {exc}",)
            raise
        entries.append(entry)
    mode = "adaptive" if selector is not None else "uniform"
    fpv = selector.m if selector is not None else frames_per_video
    return VideoIndex(corpus_id=manifest.corpus_id, alpha=alpha,
                      dim=manifest.embedding_dim, entries=entries,
                      selector_mode=mode, frames_per_video=fpv)


def retrieve_topk(index: VideoIndex, query, k: int = 1,
                  query_id: str = "q") -> RetrievalResult:
    """Exact cosine ranking of the whole index against one query.

    Ties in score break by ascending video_id. Returns min(k, corpus
    size) results.
    """
    if not index.entries:
        raise EmptyIndex("index has no entries")
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != index.dim:
        raise DimMismatch(f"query dim {q.shape[0]} != index dim {index.dim}")
    norm = float(np.linalg.norm(q))
    if norm < 1e-12:
        raise ZeroVector("query is a zero vector")
    q = q / norm
    mat = np.stack([e.ensemble_repr for e in index.entries])
    norms = np.linalg.norm(mat, axis=1)
    scores = np.clip((mat @ q) / norms, -1.0, 1.0)
    ids = np.array([e.video_id for e in index.entries])
    order = np.lexsort((ids, -scores))
    top = order[: min(k, len(order))]
    return RetrievalResult(
        query_id=query_id,
        ranked=[(str(ids[i]), float(scores[i])) for i in top],
        k=k,
    )


def recall_at_k(results: list[RetrievalResult], truth: dict[str, str], k: int) -> float:
    """Fraction of queries whose ground-truth video appears in the top k."""
    if not results:
        return 0.0
    hits = 0
    for res in results:
        if res.query_id not in truth:
            raise MissingTruth(res.query_id)
        want = truth[res.query_id]
        if any(vid == want for vid, _ in res.ranked[:k]):
            hits += 1
    return hits / len(results)


# --- persistence -----------------------------------------------------------------

def save_index(index: VideoIndex, path) -> None:
    """Write the binary VIDX layout (header, then per-entry vector runs)."""
    chunks = [VIDX_MAGIC,
              struct.pack("<I", VIDX_VERSION),
              struct.pack("<d", index.alpha),
              struct.pack("<II", index.dim, len(index.entries))]
    for e in index.entries:
        ident = e.video_id.encode("utf-8")
        chunks.append(struct.pack("<I", len(ident)))
        chunks.append(ident)
        flags = bytes([1 if e.visual_repr is not None else 0,
                       1 if e.text_repr is not None else 0,
                       1])
        chunks.append(flags)
        for vec in (e.visual_repr, e.text_repr, e.ensemble_repr):
            if vec is not None:
                chunks.append(np.ascontiguousarray(vec, dtype="<f4").tobytes())
    try:
        Path(path).write_bytes(b"".join(chunks))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_index(path) -> VideoIndex:
    """Read a VIDX file. Vectors are re-normalized after f32 storage."""
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    data = p.read_bytes()
    if len(data) < 20:
        raise TruncatedFile(p, 20, len(data))
    if data[:4] != VIDX_MAGIC:
        raise BadMagic(f"{p}: bad magic {data[:4]!r}")
    version = struct.unpack_from("<I", data, 4)[0]
    if version != VIDX_VERSION:
        raise UnsupportedVersion(version)
    alpha = struct.unpack_from("<d", data, 8)[0]
    dim, count = struct.unpack_from("<II", data, 16)
    offset = 24
    entries = []

    def need(nbytes: int):
        if offset + nbytes > len(data):
            raise TruncatedFile(p, offset + nbytes, len(data))

    for _ in range(count):
        need(4)
        id_len = struct.unpack_from("<I", data, offset)[0]
        offset += 4
        need(id_len + 3)
        video_id = data[offset: offset + id_len].decode("utf-8")
        offset += id_len
        has_visual, has_text, has_ensemble = data[offset: offset + 3]
        offset += 3
        if has_ensemble != 1:
            raise SchemaViolation("ensemble", f"entry '{video_id}' missing ensemble vector")
        vecs = {}
        for name, flag in (("visual", has_visual), ("text", has_text), ("ensemble", has_ensemble)):
            if flag:
                need(4 * dim)
                raw = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
                vecs[name] = l2_normalize(raw.astype(np.float64))
                offset += 4 * dim
        entries.append(IndexEntry(video_id=video_id,
                                  ensemble_repr=vecs["ensemble"],
                                  visual_repr=vecs.get("visual"),
                                  text_repr=vecs.get("text")))
    if offset != len(data):
        raise TruncatedFile(p, offset, len(data))
    return VideoIndex(corpus_id="", alpha=alpha, dim=int(dim), entries=entries)


def results_to_jsonl(results: list[RetrievalResult]) -> str:
    lines = []
    for res in results:
        lines.append(json.dumps({
            "query_id": res.query_id,
            "ranked": [{"video_id": vid, "score": score} for vid, score in res.ranked],
        }))
    return "\n".join(lines) + ("\n" if lines else "")


def save_results(results: list[RetrievalResult], path) -> None:
    try:
        Path(path).write_text(results_to_jsonl(results), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_results(path) -> list[RetrievalResult]:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    out = []
    for line in p.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        ranked = [(r["video_id"], float(r["score"])) for r in obj["ranked"]]
        out.append(RetrievalResult(query_id=obj["query_id"], ranked=ranked, k=len(ranked)))
    return out
