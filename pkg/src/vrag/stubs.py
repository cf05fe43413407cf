"""Deterministic in-process stand-ins for the remote endpoints.

Configuring an endpoint URL with the ``stub:`` scheme keeps the whole
pipeline runnable offline: the generator echoes questions, judges with a
payload-derived score, and emits synthetic QA arrays; the encoder hashes
text and frame identities into stable unit vectors. Every reply is a pure
function of the request, so CLI runs are byte-reproducible.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .client import (
    HttpTransport,
    RecordingTransport,
    ReplayTransport,
    StubTransport,
)
from .errors import ValidationError
from .generation import load_prompt

STUB_DIM = 64


def _digest_int(obj) -> int:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return int.from_bytes(hashlib.sha256(blob.encode("utf-8")).digest()[:8], "little")


def _text_parts(payload: dict) -> list[str]:
    out = []
    for msg in payload.get("messages", []):
        for part in msg.get("content", []):
            if part.get("type") == "text":
                out.append(part.get("text", ""))
    return out


def generator_handler(url: str, payload: dict) -> tuple[int, str]:
    """Offline generator: echo, judge, or synthesize depending on the prompt."""
    if not url.endswith("/v1/chat"):
        return 404, json.dumps({"error": f"unknown route {url}"})
    texts = _text_parts(payload)
    first = texts[0] if texts else ""
    qa_prefix = load_prompt("synthetic_qa")[:40]
    judge_prefix = load_prompt("geval")[:40]
    if first.startswith(qa_prefix):
        d = _digest_int(payload)
        pairs = [{"question": f"What happens during step {i + 1} of clip {d % 997}?",
                  "answer": f"Step {i + 1} involves action {(d >> (8 * i)) % 100}."}
                 for i in range(3)]
        return 200, json.dumps({"answer": json.dumps(pairs)})
    if first.startswith(judge_prefix):
        score = 1 + _digest_int(payload) % 5
        return 200, json.dumps({"answer": str(score)})
    question = texts[-1] if texts else ""
    return 200, json.dumps({"answer": question})


def _hash_vector(label: str, dim: int = STUB_DIM) -> np.ndarray:
    raw = hashlib.sha256(label.encode("utf-8")).digest()
    seed = int.from_bytes(raw[:8], "little")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _embed_text_value(text: str, dim: int = STUB_DIM) -> np.ndarray:
    tokens = text.lower().split() or ["<empty>"]
    acc = np.zeros(dim)
    for tok in tokens:
        acc += _hash_vector("token:" + tok, dim)
    norm = np.linalg.norm(acc)
    if norm < 1e-12:
        acc = _hash_vector("token:<degenerate>", dim)
        norm = 1.0
    return acc / norm


def encoder_handler(url: str, payload: dict) -> tuple[int, str]:
    """Offline encoder: stable hash embeddings, fixed-length fake clips."""
    if url.endswith("/healthz"):
        return 200, json.dumps({"status": "ok", "encoder_id": "stub-encoder",
                                "dim": STUB_DIM})
    if url.endswith("/v1/embed/text"):
        texts = payload.get("texts", [])
        if not texts:
            return 400, json.dumps({"error": "texts must be non-empty"})
        vectors = [_embed_text_value(t).tolist() for t in texts]
        return 200, json.dumps({"embeddings": vectors, "count": len(vectors),
                                "dim": STUB_DIM})
    if url.endswith("/v1/embed/frames"):
        video_path = payload.get("video_path", "")
        fps = float(payload.get("fps", 1.0))
        count = max(1, 4 + _digest_int(video_path) % 5)
        vectors = [_hash_vector(f"frame:{video_path}:{i}").tolist() for i in range(count)]
        timestamps = [(i + 0.5) / fps for i in range(count)]
        return 200, json.dumps({"embeddings": vectors, "count": len(vectors),
                                "timestamps": timestamps, "dim": STUB_DIM})
    if url.endswith("/v1/transcribe"):
        stem = Path(payload.get("video_path", "clip")).stem
        text = f"narration for {stem}"
        return 200, json.dumps({
            "text": text,
            "segments": [{"start_s": 0.0, "end_s": 2.0, "text": text}],
        })
    return 404, json.dumps({"error": f"unknown route {url}"})


_STUB_HANDLERS = {
    "stub:gen": generator_handler,
    "stub:echo": generator_handler,
    "stub:encoder": encoder_handler,
}


def make_transport(base_url: str, record_path=None, replay_path=None):
    """Transport for a base URL: replay file, stub scheme, or real HTTP."""
    if replay_path is not None:
        return ReplayTransport(replay_path)
    if base_url.startswith("stub:"):
        handler = _STUB_HANDLERS.get(base_url.split("/")[0])
        if handler is None:
            raise ValidationError(
                f"unknown stub endpoint {base_url!r}; expected one of {sorted(_STUB_HANDLERS)}")
        transport = StubTransport(handler)
    else:
        transport = HttpTransport()
    if record_path is not None:
        transport = RecordingTransport(transport, record_path)
    return transport
