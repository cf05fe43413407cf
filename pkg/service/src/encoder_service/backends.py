"""Reference encoder and transcription backends.

The service's stable surface is its HTTP contract, not any particular
model, so the backends here are deterministic stand-ins that honor every
response invariant: unit-norm embeddings in one shared text/visual space,
and transcripts with time-aligned segments.

The dual encoder embeds a small color vocabulary and frame pixel
statistics onto shared anchor directions, which is enough for a caption
to land nearer its matching frame than a mismatched one. Everything else
hashes onto stable pseudo-random directions. A deployment that needs real
semantics swaps this module for one backed by a pretrained model; the app
layer and wire format stay put.

Transcription reads a recorded transcript sidecar next to the media file
(``<name>.transcript.json`` with ``{"text": ..., "segments": [...]}``),
standing in for an ASR model run. A clip with no sidecar is treated as
having no audio track; a silent clip ships a sidecar with empty text and
no segments.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DIM = 64
ENCODER_ID = "reference-dual-64"

# Longest run of characters embedded in one piece; longer texts are split
# on whitespace near this size and the chunk vectors are mean-pooled.
CHUNK_CHARS = 512

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _direction(label: str) -> np.ndarray:
    """Stable unit vector for a label, derived from its hash."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.standard_normal(DIM)
    return v / np.linalg.norm(v)


# Channel anchors shared by both modalities. The text side reaches them
# through the color words below; the visual side through pixel means.
_ANCHORS = {
    "red": _direction("anchor:red"),
    "green": _direction("anchor:green"),
    "blue": _direction("anchor:blue"),
    "luma": _direction("anchor:luma"),
}
_COLOR_WORDS = {"red": "red", "crimson": "red", "green": "green",
                "blue": "blue", "bright": "luma", "dark": "luma",
                "light": "luma"}


def _embed_chunk(chunk: str) -> np.ndarray:
    acc = np.zeros(DIM)
    tokens = _TOKEN_RE.findall(chunk.lower())
    for tok in tokens:
        if tok in _COLOR_WORDS:
            acc += _ANCHORS[_COLOR_WORDS[tok]]
        else:
            acc += 0.4 * _direction(f"token:{tok}")
    if not tokens:
        acc = _direction("token:")
    return acc


def _chunks(text: str) -> list[str]:
    if len(text) <= CHUNK_CHARS:
        return [text]
    out = []
    start = 0
    while start < len(text):
        end = min(start + CHUNK_CHARS, len(text))
        if end < len(text):
            space = text.rfind(" ", start, end)
            if space > start:
                end = space
        out.append(text[start:end])
        start = end
    return out


def embed_text(text: str) -> np.ndarray:
    """Unit embedding of one text; long inputs are chunked and mean-pooled."""
    parts = [_embed_chunk(c) for c in _chunks(text)]
    acc = np.mean(parts, axis=0)
    norm = np.linalg.norm(acc)
    if norm < 1e-12:
        acc, norm = _direction("token:"), 1.0
    return acc / norm


def embed_frame(frame: np.ndarray) -> np.ndarray:
    """Unit embedding of one decoded frame (H x W x 3, BGR byte order)."""
    pixels = frame.reshape(-1, 3).astype(np.float64) / 255.0
    b, g, r = pixels.mean(axis=0)
    luma = float(pixels.mean())
    spread = float(pixels.std())
    acc = (r * _ANCHORS["red"] + g * _ANCHORS["green"] + b * _ANCHORS["blue"]
           + luma * _ANCHORS["luma"] + spread * _direction("visual:texture"))
    norm = np.linalg.norm(acc)
    if norm < 1e-12:
        acc, norm = _ANCHORS["luma"], 1.0
    return acc / norm


class TranscriptError(Exception):
    """Base for transcription failures."""


class NoAudioTrack(TranscriptError):
    """The clip has no audio to transcribe (no recorded sidecar)."""


class MalformedTranscript(TranscriptError):
    """The recorded sidecar exists but violates the segment contract."""


@dataclass
class Transcript:
    text: str
    segments: list[dict]


def transcribe(video_path: Path) -> Transcript:
    """Transcript for a clip, from its recorded sidecar.

    Raises:
        NoAudioTrack: no sidecar next to the media file.
        MalformedTranscript: sidecar unreadable, or segments overlap /
            run backwards / miss required fields.
    """
    sidecar = video_path.with_suffix(".transcript.json")
    if not sidecar.is_file():
        raise NoAudioTrack(f"{video_path.name} has no audio track")
    try:
        obj = json.loads(sidecar.read_text(encoding="utf-8"))
        text = obj["text"]
        segments = obj.get("segments", [])
        if not isinstance(text, str) or not isinstance(segments, list):
            raise TypeError("bad field types")
        prev_start, prev_end = -np.inf, -np.inf
        for seg in segments:
            start, end = float(seg["start_s"]), float(seg["end_s"])
            str(seg["text"])
            if end < start or start < prev_start or start < prev_end:
                raise ValueError("segments must be ordered and non-overlapping")
            prev_start, prev_end = start, end
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedTranscript(f"{sidecar.name}: {exc}") from exc
    return Transcript(text=text, segments=[
        {"start_s": float(s["start_s"]), "end_s": float(s["end_s"]),
         "text": str(s["text"])} for s in segments])
