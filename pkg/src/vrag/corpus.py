"""Corpus manifest and embedding-file persistence.

Manifests are UTF-8 JSON. Embedding matrices use a small binary format
(magic ``VREM``) so that float payloads round-trip bit-exactly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DuplicateVideoId,
    IoFailure,
    MissingFile,
    NonFiniteValue,
    SchemaViolation,
    TruncatedFile,
    UnsupportedVersion,
)

VREM_MAGIC = b"VREM"
VREM_VERSION = 1
_MODALITY_CODES = {"visual": 0, "text": 1}
_MODALITY_NAMES = {0: "visual", 1: "text"}

_VIDEO_KEYS = ("video_id", "source_path", "duration_s", "frame_count",
               "subtitle", "aux_transcript", "category")
_VIDEO_REQUIRED = ("video_id", "source_path", "duration_s", "frame_count")
_MANIFEST_KEYS = ("corpus_id", "encoder_id", "embedding_dim", "embedding_dir", "videos")


@dataclass
class VideoRecord:
    video_id: str
    source_path: str
    duration_s: float
    frame_count: int
    subtitle: str | None = None
    aux_transcript: str | None = None
    category: str | None = None

    def __post_init__(self):
        if not isinstance(self.video_id, str) or not self.video_id:
            raise SchemaViolation("video_id", "must be a non-empty string")
        if not isinstance(self.source_path, str):
            raise SchemaViolation("source_path", "must be a string")
        if isinstance(self.duration_s, bool) or not isinstance(self.duration_s, (int, float)):
            raise SchemaViolation("duration_s", "must be a number")
        self.duration_s = float(self.duration_s)
        if self.duration_s < 0:
            raise SchemaViolation("duration_s", "must be non-negative")
        if isinstance(self.frame_count, bool) or not isinstance(self.frame_count, int):
            raise SchemaViolation("frame_count", "must be an integer")
        if self.frame_count < 1:
            raise SchemaViolation("frame_count", "must be >= 1")
        for name in ("subtitle", "aux_transcript", "category"):
            val = getattr(self, name)
            if val is not None and not isinstance(val, str):
                raise SchemaViolation(name, "must be a string when present")

    def to_dict(self) -> dict:
        d = {
            "video_id": self.video_id,
            "source_path": self.source_path,
            "duration_s": self.duration_s,
            "frame_count": self.frame_count,
        }
        for name in ("subtitle", "aux_transcript", "category"):
            val = getattr(self, name)
            if val is not None:
                d[name] = val
        return d


@dataclass
class CorpusManifest:
    corpus_id: str
    encoder_id: str
    embedding_dim: int
    embedding_dir: str
    videos: list[VideoRecord] = field(default_factory=list)

    def __post_init__(self):
        if not isinstance(self.corpus_id, str) or not self.corpus_id:
            raise SchemaViolation("corpus_id", "must be a non-empty string")
        if not isinstance(self.encoder_id, str) or not self.encoder_id:
            raise SchemaViolation("encoder_id", "must be a non-empty string")
        if isinstance(self.embedding_dim, bool) or not isinstance(self.embedding_dim, int):
            raise SchemaViolation("embedding_dim", "must be an integer")
        if self.embedding_dim < 1:
            raise SchemaViolation("embedding_dim", "must be >= 1")
        if not isinstance(self.embedding_dir, str):
            raise SchemaViolation("embedding_dir", "must be a string")
        seen: set[str] = set()
        for rec in self.videos:
            if rec.video_id in seen:
                raise DuplicateVideoId(rec.video_id)
            seen.add(rec.video_id)

    def record_for(self, video_id: str) -> VideoRecord:
        for rec in self.videos:
            if rec.video_id == video_id:
                return rec
        raise SchemaViolation("video_id", f"'{video_id}' not in manifest")


@dataclass
class EmbeddingMatrix:
    video_id: str
    modality: str
    dim: int
    count: int
    values: np.ndarray
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        if self.modality not in _MODALITY_CODES:
            raise SchemaViolation("modality", f"must be 'visual' or 'text', got {self.modality!r}")
        if self.dim < 1:
            raise SchemaViolation("dim", "must be >= 1")
        if self.count < 1:
            raise SchemaViolation("count", "must be >= 1")
        if self.modality == "text" and self.count != 1:
            raise SchemaViolation("count", "text embeddings must have count = 1")
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.shape != (self.count, self.dim):
            raise SchemaViolation(
                "values", f"expected shape ({self.count}, {self.dim}), got {self.values.shape}")
        bad = np.argwhere(~np.isfinite(self.values))
        if bad.size:
            r, c = bad[0]
            raise NonFiniteValue(int(r), int(c))
        if self.timestamps is not None:
            self.timestamps = np.asarray(self.timestamps, dtype=np.float32)
            if self.timestamps.shape != (self.count,):
                raise SchemaViolation("timestamps", f"expected {self.count} entries")
            if self.count > 1 and not np.all(np.diff(self.timestamps) > 0):
                raise SchemaViolation("timestamps", "must be strictly increasing")


def embedding_path(embedding_dir, video_id: str, modality: str) -> Path:
    """File location for one video's embedding matrix."""
    return Path(embedding_dir) / f"{video_id}.{modality}.vrem"


def validate_embed_response(vectors, dim: int | None = None, timestamps=None,
                            norm_tol: float = 1e-5) -> np.ndarray:
    """Check an encoder response against the ingest contract.

    Every row must be finite, length-consistent (and equal to ``dim`` when
    given), and unit norm within norm_tol; timestamps, when supplied, must
    be strictly increasing with one entry per row. Returns the rows as a
    float32 matrix ready for EmbeddingMatrix.

    Raises:
        SchemaViolation / NonFiniteValue on any contract breach.
    """
    rows = [np.asarray(v, dtype=np.float64).reshape(-1) for v in vectors]
    if not rows:
        raise SchemaViolation("embeddings", "response contains no embeddings")
    width = rows[0].shape[0] if dim is None else int(dim)
    for r, row in enumerate(rows):
        if row.shape[0] != width:
            raise SchemaViolation("dim", f"row {r} has dim {row.shape[0]}, expected {width}")
        bad = np.argwhere(~np.isfinite(row))
        if bad.size:
            raise NonFiniteValue(r, int(bad[0][0]))
        norm = float(np.linalg.norm(row))
        if abs(norm - 1.0) > norm_tol:
            raise SchemaViolation("embeddings", f"row {r} norm {norm:.8f} outside 1 +/- {norm_tol}")
    if timestamps is not None:
        ts = np.asarray(timestamps, dtype=np.float64)
        if ts.shape != (len(rows),):
            raise SchemaViolation("timestamps", f"expected {len(rows)} entries, got {ts.shape}")
        if len(rows) > 1 and not np.all(np.diff(ts) > 0):
            raise SchemaViolation("timestamps", "must be strictly increasing")
    return np.stack(rows).astype(np.float32)


# --- manifest JSON -------------------------------------------------------------

def _record_from_dict(obj: dict) -> VideoRecord:
    if not isinstance(obj, dict):
        raise SchemaViolation("videos", "each entry must be an object")
    for key in obj:
        if key not in _VIDEO_KEYS:
            raise SchemaViolation(key, "unknown video field")
    for key in _VIDEO_REQUIRED:
        if key not in obj:
            raise SchemaViolation(key, "missing required video field")
    return VideoRecord(
        video_id=obj["video_id"],
        source_path=obj["source_path"],
        duration_s=obj["duration_s"],
        frame_count=obj["frame_count"],
        subtitle=obj.get("subtitle"),
        aux_transcript=obj.get("aux_transcript"),
        category=obj.get("category"),
    )


def load_manifest(path) -> CorpusManifest:
    """Parse and validate a corpus manifest JSON file."""
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    try:
        raw = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {p}: {exc}") from exc
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaViolation("$", "top level must be an object")
    for key in obj:
        if key not in _MANIFEST_KEYS:
            raise SchemaViolation(key, "unknown manifest field")
    for key in _MANIFEST_KEYS:
        if key not in obj:
            raise SchemaViolation(key, "missing required manifest field")
    if not isinstance(obj["videos"], list):
        raise SchemaViolation("videos", "must be a list")
    videos = [_record_from_dict(v) for v in obj["videos"]]
    return CorpusManifest(
        corpus_id=obj["corpus_id"],
        encoder_id=obj["encoder_id"],
        embedding_dim=obj["embedding_dim"],
        embedding_dir=obj["embedding_dir"],
        videos=videos,
    )


def manifest_to_json(m: CorpusManifest) -> str:
    """Canonical serialization: fixed key order, 2-space indent, trailing newline."""
    obj = {
        "corpus_id": m.corpus_id,
        "encoder_id": m.encoder_id,
        "embedding_dim": m.embedding_dim,
        "embedding_dir": m.embedding_dir,
        "videos": [rec.to_dict() for rec in m.videos],
    }
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def save_manifest(m: CorpusManifest, path) -> None:
    try:
        Path(path).write_text(manifest_to_json(m), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# --- VREM binary format --------------------------------------------------------

def write_embeddings(e: EmbeddingMatrix, path) -> None:
    """Write an embedding matrix in the VREM binary layout."""
    bad = np.argwhere(~np.isfinite(e.values))
    if bad.size:
        r, c = bad[0]
        raise NonFiniteValue(int(r), int(c))
    flag = 1 if e.timestamps is not None else 0
    header = VREM_MAGIC + struct.pack(
        "<IIII B", VREM_VERSION, _MODALITY_CODES[e.modality], e.dim, e.count, flag)
    chunks = [header]
    if flag:
        chunks.append(np.ascontiguousarray(e.timestamps, dtype="<f4").tobytes())
    chunks.append(np.ascontiguousarray(e.values, dtype="<f4").tobytes())
    try:
        Path(path).write_bytes(b"".join(chunks))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_embeddings(path) -> EmbeddingMatrix:
    """Read a VREM file back into an EmbeddingMatrix.

    The video_id is recovered from the file name stem.
    """
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {p}: {exc}") from exc
    if len(data) < 21:
        raise TruncatedFile(p, 21, len(data))
    if data[:4] != VREM_MAGIC:
        raise BadMagic(f"{p}: bad magic {data[:4]!r}")
    version, modality_code, dim, count, flag = struct.unpack("<IIII B", data[4:21])
    if version != VREM_VERSION:
        raise UnsupportedVersion(version)
    if modality_code not in _MODALITY_NAMES:
        raise SchemaViolation("modality", f"unknown modality code {modality_code}")
    if flag not in (0, 1):
        raise SchemaViolation("timestamp-flag", f"must be 0 or 1, got {flag}")
    ts_bytes = 4 * count if flag else 0
    expected = 21 + ts_bytes + 4 * count * dim
    if len(data) != expected:
        raise TruncatedFile(p, expected, len(data))
    offset = 21
    timestamps = None
    if flag:
        timestamps = np.frombuffer(data, dtype="<f4", count=count, offset=offset).copy()
        offset += ts_bytes
    values = np.frombuffer(data, dtype="<f4", count=count * dim, offset=offset)
    values = values.reshape(count, dim).copy()
    name = p.name
    for suffix in (".visual.vrem", ".text.vrem", ".vrem"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
            break
    return EmbeddingMatrix(
        video_id=name,
        modality=_MODALITY_NAMES[modality_code],
        dim=int(dim),
        count=int(count),
        values=values,
        timestamps=timestamps,
    )
