"""Multimodal context assembly, answer generation, and judging.

A generation context carries, in retrieval rank order, each retrieved
video's selected frames plus (optionally) its transcript, with the user's
question appended last exactly once. The serialized context feeds the
generator endpoint; a digest of that payload makes every answer traceable
to the exact bytes it saw.
"""

from __future__ import annotations

import base64
import hashlib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .corpus import CorpusManifest, embedding_path, read_embeddings
from .errors import (
    EmptyAnswer,
    EmptyRetrieval,
    IoFailure,
    MalformedJson,
    MissingTranscript,
    ScoreOutOfRange,
    UnparseableScore,
    WrongCount,
    WrongMode,
)
from .retrieval import RetrievalResult, select_frame_indices
from .rng import derive_seed
from .selector import SelectorModel

DEFAULT_GEN_FRAMES = 32
DEFAULT_GEN_CANDIDATES = 64
DEFAULT_GEN_SUBSETS = 40
DEFAULT_MAX_SEGMENT_CHARS = 8000
MODES = ("video_only", "video_plus_text")


def load_prompt(name: str) -> str:
    """Read a prompt template bundled with the package."""
    return (resources.files("vrag") / "prompts" / f"{name}.txt").read_text(encoding="utf-8")


@dataclass
class ContextSegment:
    video_id: str
    frame_refs: list[tuple[int, float]]
    transcript_text: str | None = None
    truncated: bool = False


@dataclass
class GenerationContext:
    query_id: str
    question: str
    segments: list[ContextSegment]
    mode: str


@dataclass
class GenerationResult:
    query_id: str
    answer_text: str
    generator_id: str
    context_digest: str
    question: str = ""
    truncated_video_ids: tuple[str, ...] = ()


@dataclass
class QAExample:
    question: str
    answer: str
    source_video_id: str
    origin: str = "dataset"
    category: str | None = None


def assemble_context(question: str, retrieved: RetrievalResult,
                     manifest: CorpusManifest,
                     selector: SelectorModel | None = None,
                     mode: str = "video_only",
                     frames_per_video: int = DEFAULT_GEN_FRAMES,
                     candidates: int = DEFAULT_GEN_CANDIDATES,
                     n_subsets: int = DEFAULT_GEN_SUBSETS,
                     seed: int = 0,
                     query_vec=None,
                     asr_client=None,
                     max_segment_chars: int = DEFAULT_MAX_SEGMENT_CHARS) -> GenerationContext:
    """Build the generation context for one query.

    Segments appear in retrieval rank order. Frame choice per video:
    every frame when the video has at most frames_per_video frames;
    otherwise a uniform stride, or, with a generation-mode selector, a
    query-conditioned pick over cluster-reduced candidates (query_vec is
    the query's embedding). In video_plus_text mode each segment needs
    transcript text, fetched through asr_client when the record has none.

    Raises:
        EmptyRetrieval: no ranked videos.
        MissingTranscript: video_plus_text with no text and no asr_client.
    """
    if mode not in MODES:
        raise WrongMode(f"unknown generation mode {mode!r}")
    if not retrieved.ranked:
        raise EmptyRetrieval(f"query '{retrieved.query_id}' retrieved no videos")
    segments = []
    for video_id, _score in retrieved.ranked:
        rec = manifest.record_for(video_id)
        visual = read_embeddings(embedding_path(manifest.embedding_dir, video_id, "visual"))
        idx = select_frame_indices(
            visual, selector, frames_per_video,
            derive_seed(seed, "assemble", retrieved.query_id, video_id),
            query=query_vec, n_subsets=n_subsets, candidates=candidates)
        if visual.timestamps is not None:
            refs = [(i, float(visual.timestamps[i])) for i in idx]
        else:
            refs = [(i, float(i)) for i in idx]  # 1 fps sampling: frame i sits at second i
        refs.sort(key=lambda r: (r[1], r[0]))
        transcript = None
        truncated = False
        if mode == "video_plus_text":
            transcript = rec.subtitle if rec.subtitle is not None else rec.aux_transcript
            if transcript is None:
                if asr_client is None:
                    raise MissingTranscript(video_id)
                rec = ensure_transcript(rec, asr_client)
                transcript = rec.aux_transcript
            if len(transcript) > max_segment_chars:
                transcript = transcript[:max_segment_chars]
                truncated = True
        segments.append(ContextSegment(video_id=video_id, frame_refs=refs,
                                       transcript_text=transcript, truncated=truncated))
    return GenerationContext(query_id=retrieved.query_id, question=question,
                             segments=segments, mode=mode)


def context_messages(ctx: GenerationContext, frames_dir=None) -> list[dict]:
    """Serialize a context into the generator's chat-message schema.

    Per segment, frame parts come first, then one text part with the
    transcript when present; the question is the final part. A frame
    becomes a base64 image part when <frames_dir>/<video_id>/<index>.jpg
    exists, and a deterministic text reference otherwise.
    """
    parts = []
    for seg in ctx.segments:
        for index, ts in seg.frame_refs:
            img = None
            if frames_dir is not None:
                fp = Path(frames_dir) / seg.video_id / f"{index}.jpg"
                if fp.is_file():
                    img = base64.b64encode(fp.read_bytes()).decode("ascii")
            if img is not None:
                parts.append({"type": "image", "data": img, "mime": "image/jpeg"})
            else:
                parts.append({"type": "text",
                              "text": f"[frame {seg.video_id}/{index} t={ts:.3f}s]"})
        if seg.transcript_text is not None:
            parts.append({"type": "text", "text": seg.transcript_text})
    parts.append({"type": "text", "text": ctx.question})
    return [{"role": "user", "content": parts}]


def context_digest(messages: list[dict]) -> str:
    blob = json.dumps(messages, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def generate_answer(ctx: GenerationContext, client, frames_dir=None) -> GenerationResult:
    """Send one context to the generator and wrap its verbatim answer.

    Raises:
        TransportFailure / GeneratorError: endpoint problems.
        EmptyAnswer: the generator returned nothing usable.
    """
    messages = context_messages(ctx, frames_dir)
    digest = context_digest(messages)
    answer = client.chat(messages)
    if not answer.strip():
        raise EmptyAnswer(f"generator returned an empty answer for '{ctx.query_id}'")
    truncated = tuple(s.video_id for s in ctx.segments if s.truncated)
    return GenerationResult(query_id=ctx.query_id, answer_text=answer,
                            generator_id=client.model, context_digest=digest,
                            question=ctx.question, truncated_video_ids=truncated)


def generate_batch(contexts: list[GenerationContext], client, frames_dir=None,
                   max_inflight: int = 4) -> list[GenerationResult]:
    """Generate answers for many contexts, bounded concurrency.

    Results come back in input order regardless of completion order.
    """
    if not contexts:
        return []
    with ThreadPoolExecutor(max_workers=max(1, max_inflight)) as pool:
        futures = [pool.submit(generate_answer, ctx, client, frames_dir)
                   for ctx in contexts]
        return [f.result() for f in futures]


def ensure_transcript(v, asr_client):
    """Fill aux_transcript via the ASR endpoint when no text exists.

    Returns the record unchanged (no network) when it already carries a
    subtitle or transcript, so repeated calls are free.
    """
    if v.subtitle is not None or v.aux_transcript is not None:
        return v
    reply = asr_client.transcribe(v.source_path)
    return replace(v, aux_transcript=str(reply.get("text", "")))


# --- synthetic QA ------------------------------------------------------------------

def _first_json_array(text: str):
    decoder = json.JSONDecoder()
    for match in re.finditer(r"\[", text):
        try:
            value, _ = decoder.raw_decode(text, match.start())
        except json.JSONDecodeError:
            continue
        if isinstance(value, list):
            return value
    raise MalformedJson("no top-level JSON array in generator reply")


def _parse_qa_array(reply: str, video_id: str) -> list[QAExample]:
    arr = _first_json_array(reply)
    examples = []
    for item in arr:
        if (not isinstance(item, dict)
                or not isinstance(item.get("question"), str)
                or not isinstance(item.get("answer"), str)
                or not item["question"].strip() or not item["answer"].strip()):
            raise MalformedJson("array items must be {question, answer} objects")
        examples.append(QAExample(question=item["question"], answer=item["answer"],
                                  source_video_id=video_id, origin="synthetic"))
    if len(examples) != 3:
        raise WrongCount(len(examples))
    return examples


def synthesize_qa(video, client, content_parts: list[dict] | None = None) -> list[QAExample]:
    """Ask the generator for exactly 3 question-answer pairs about a video.

    content_parts, when given, are appended after the instruction prompt
    (frames, transcript text). A malformed reply is retried once before
    MalformedJson propagates; a well-formed array of the wrong length is
    WrongCount immediately.
    """
    prompt = load_prompt("synthetic_qa")
    parts = [{"type": "text", "text": prompt}]
    if content_parts:
        parts.extend(content_parts)
    elif getattr(video, "subtitle", None):
        parts.append({"type": "text", "text": video.subtitle})
    messages = [{"role": "user", "content": parts}]
    attempts = 0
    while True:
        reply = client.chat(messages)
        attempts += 1
        try:
            return _parse_qa_array(reply, video.video_id)
        except WrongCount:
            raise
        except MalformedJson:
            if attempts >= 2:
                raise


def geval_judge(question: str, ground_truth: str, generated: str, client) -> int:
    """Score a generated answer 1-5 against the ground truth.

    The judge prompt is the bundled template with the three placeholders
    substituted. The reply's first whitespace-delimited token that parses
    as an integer is the score.

    Raises:
        UnparseableScore: no integer token in the reply.
        ScoreOutOfRange: integer outside [1, 5].
    """
    prompt = (load_prompt("geval")
              .replace("{{Question}}", question)
              .replace("{{Ground_Truth_Answer}}", ground_truth)
              .replace("{{Generated_Response}}", generated))
    reply = client.chat([{"role": "user", "content": [{"type": "text", "text": prompt}]}])
    for token in reply.split():
        try:
            value = int(token)
        except ValueError:
            continue
        if not 1 <= value <= 5:
            raise ScoreOutOfRange(value)
        return value
    raise UnparseableScore(f"no integer token in judge reply: {reply[:120]!r}")


# --- results persistence -------------------------------------------------------------

def results_to_jsonl(results: list[GenerationResult]) -> str:
    lines = []
    for r in results:
        lines.append(json.dumps({
            "query_id": r.query_id,
            "question": r.question,
            "answer": r.answer_text,
            "context_digest": r.context_digest,
            "generator_id": r.generator_id,
        }, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


def save_generation_results(results: list[GenerationResult], path) -> None:
    try:
        Path(path).write_text(results_to_jsonl(results), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_generation_results(path) -> list[GenerationResult]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        out.append(GenerationResult(
            query_id=obj["query_id"], answer_text=obj["answer"],
            generator_id=obj["generator_id"], context_digest=obj["context_digest"],
            question=obj.get("question", "")))
    return out
