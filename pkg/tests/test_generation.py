from __future__ import annotations

import json

import numpy as np
import pytest

from vrag.client import GeneratorClient, StubTransport
from vrag.corpus import VideoRecord
from vrag.errors import (
    EmptyAnswer,
    EmptyRetrieval,
    MalformedJson,
    MissingTranscript,
    ScoreOutOfRange,
    UnparseableScore,
    WrongCount,
    WrongMode,
)
from vrag.generation import (
    ContextSegment,
    GenerationContext,
    assemble_context,
    context_digest,
    context_messages,
    ensure_transcript,
    generate_answer,
    generate_batch,
    geval_judge,
    load_generation_results,
    load_prompt,
    save_generation_results,
    synthesize_qa,
)
from vrag.retrieval import RetrievalResult, build_index, retrieve_topk
from vrag.stubs import encoder_handler, generator_handler


def _stub_client(handler=generator_handler, model="stub-model"):
    return GeneratorClient(base_url="stub:gen", model=model,
                           transport=StubTransport(handler))


def _retrieved(corpus, vid="vid00", qid="q0"):
    index = build_index(corpus["manifest"], alpha=0.6, seed=0)
    return retrieve_topk(index, corpus["targets"][vid], k=1, query_id=qid)


def test_prompts_bundled():
    qa = load_prompt("synthetic_qa")
    judge = load_prompt("geval")
    assert "question-answer pairs" in qa
    assert "{{Question}}" in judge
    assert "{{Ground_Truth_Answer}}" in judge
    assert "{{Generated_Response}}" in judge


def test_assemble_context_video_only(corpus):
    result = _retrieved(corpus)
    ctx = assemble_context("what happens?", result, corpus["manifest"],
                           mode="video_only", frames_per_video=4, seed=0)
    assert ctx.query_id == "q0"
    assert len(ctx.segments) == 1
    seg = ctx.segments[0]
    assert seg.video_id == "vid00"
    assert len(seg.frame_refs) == 4
    ts = [t for _, t in seg.frame_refs]
    assert ts == sorted(ts)
    assert seg.transcript_text is None


def test_assemble_context_rank_order(corpus):
    index = build_index(corpus["manifest"], alpha=0.6, seed=0)
    result = retrieve_topk(index, corpus["targets"]["vid01"], k=3, query_id="q")
    ctx = assemble_context("q?", result, corpus["manifest"], mode="video_only", seed=0)
    assert [s.video_id for s in ctx.segments] == [vid for vid, _ in result.ranked]


def test_assemble_context_text_mode_uses_subtitle(corpus):
    result = _retrieved(corpus)
    ctx = assemble_context("q?", result, corpus["manifest"],
                           mode="video_plus_text", seed=0)
    assert ctx.segments[0].transcript_text.startswith("clip 0")


def test_assemble_context_text_mode_missing_transcript(tmp_path):
    from conftest import build_corpus_dir
    bare = build_corpus_dir(tmp_path / "bare", with_subtitles=False)
    index = build_index(bare["manifest"], alpha=0.6, seed=0)
    result = retrieve_topk(index, bare["targets"]["vid00"], k=1, query_id="q")
    with pytest.raises(MissingTranscript):
        assemble_context("q?", result, bare["manifest"], mode="video_plus_text", seed=0)


def test_assemble_context_truncates_long_transcripts(corpus):
    manifest = corpus["manifest"]
    manifest.videos[0].subtitle = "word " * 5000
    result = _retrieved(corpus)
    ctx = assemble_context("q?", result, manifest, mode="video_plus_text",
                           seed=0, max_segment_chars=100)
    assert len(ctx.segments[0].transcript_text) == 100
    assert ctx.segments[0].truncated


def test_assemble_context_guards(corpus):
    empty = RetrievalResult(query_id="q", ranked=[], k=1)
    with pytest.raises(EmptyRetrieval):
        assemble_context("q?", empty, corpus["manifest"], mode="video_only")
    result = _retrieved(corpus)
    with pytest.raises(WrongMode):
        assemble_context("q?", result, corpus["manifest"], mode="nonsense")


def test_context_messages_layout(corpus):
    result = _retrieved(corpus)
    ctx = assemble_context("the question", result, corpus["manifest"],
                           mode="video_plus_text", frames_per_video=2, seed=0)
    messages = context_messages(ctx)
    assert len(messages) == 1
    parts = messages[0]["content"]
    assert parts[-1] == {"type": "text", "text": "the question"}
    assert parts[0]["type"] == "text"
    assert parts[0]["text"].startswith("[frame vid00/")
    assert parts[-2]["text"].startswith("clip 0")


def test_context_messages_image_parts(tmp_path, corpus):
    frames_dir = tmp_path / "frames"
    result = _retrieved(corpus)
    ctx = assemble_context("q?", result, corpus["manifest"],
                           mode="video_only", frames_per_video=2, seed=0)
    first_idx = ctx.segments[0].frame_refs[0][0]
    target = frames_dir / "vid00"
    target.mkdir(parents=True)
    (target / f"{first_idx}.jpg").write_bytes(b"\xff\xd8fakejpeg")
    parts = context_messages(ctx, frames_dir)[0]["content"]
    assert parts[0]["type"] == "image"
    assert parts[0]["mime"] == "image/jpeg"
    assert parts[1]["type"] == "text"  # second frame has no file on disk


def test_context_digest_stable(corpus):
    result = _retrieved(corpus)
    ctx = assemble_context("q?", result, corpus["manifest"], mode="video_only", seed=0)
    d1 = context_digest(context_messages(ctx))
    d2 = context_digest(context_messages(ctx))
    assert d1 == d2 and len(d1) == 64


def test_generate_answer_echoes_question(corpus):
    result = _retrieved(corpus)
    ctx = assemble_context("what is shown?", result, corpus["manifest"],
                           mode="video_only", seed=0)
    out = generate_answer(ctx, _stub_client())
    assert out.answer_text == "what is shown?"
    assert out.query_id == "q0"
    assert out.generator_id == "stub-model"


def test_generate_answer_empty_rejected():
    client = _stub_client(lambda url, payload: (200, json.dumps({"answer": "   "})))
    ctx = GenerationContext(query_id="q", question="q?", mode="video_only",
                            segments=[ContextSegment(video_id="v", frame_refs=[(0, 0.0)])])
    with pytest.raises(EmptyAnswer):
        generate_answer(ctx, client)


def test_generate_batch_preserves_order(corpus):
    index = build_index(corpus["manifest"], alpha=0.6, seed=0)
    contexts = []
    for i, (vid, target) in enumerate(sorted(corpus["targets"].items())):
        result = retrieve_topk(index, target, k=1, query_id=f"q{i}")
        contexts.append(assemble_context(f"question {i}", result, corpus["manifest"],
                                         mode="video_only", seed=0))
    outs = generate_batch(contexts, _stub_client(), max_inflight=3)
    assert [o.query_id for o in outs] == [f"q{i}" for i in range(5)]
    assert [o.answer_text for o in outs] == [f"question {i}" for i in range(5)]


def test_ensure_transcript_idempotent():
    from vrag.client import EncoderClient
    calls = []

    def handler(url, payload):
        calls.append(url)
        return encoder_handler(url, payload)

    client = EncoderClient(base_url="stub:encoder", transport=StubTransport(handler))
    rec = VideoRecord(video_id="v", source_path="/m/v.mp4", duration_s=5.0,
                      frame_count=5)
    filled = ensure_transcript(rec, client)
    assert filled.aux_transcript
    n_calls = len(calls)
    again = ensure_transcript(filled, client)
    assert again is filled
    assert len(calls) == n_calls


def test_synthesize_qa_three_pairs():
    rec = VideoRecord(video_id="v", source_path="/m/v.mp4", duration_s=5.0,
                      frame_count=5, subtitle="someone bakes bread")
    out = synthesize_qa(rec, _stub_client())
    assert len(out) == 3
    assert all(ex.origin == "synthetic" for ex in out)
    assert all(ex.source_video_id == "v" for ex in out)


def test_synthesize_qa_wrong_count():
    def handler(url, payload):
        return (200, json.dumps({"answer": json.dumps([
            {"question": "a?", "answer": "b"}, {"question": "c?", "answer": "d"}])}))
    rec = VideoRecord(video_id="v", source_path="", duration_s=1.0, frame_count=1)
    with pytest.raises(WrongCount):
        synthesize_qa(rec, _stub_client(handler))


def test_synthesize_qa_retries_malformed_once():
    replies = iter(["not json at all",
                    json.dumps([{"question": f"q{i}?", "answer": f"a{i}"} for i in range(3)])])

    def handler(url, payload):
        return (200, json.dumps({"answer": next(replies)}))

    rec = VideoRecord(video_id="v", source_path="", duration_s=1.0, frame_count=1)
    out = synthesize_qa(rec, _stub_client(handler))
    assert len(out) == 3


def test_synthesize_qa_malformed_twice_fails():
    def handler(url, payload):
        return (200, json.dumps({"answer": "still not json"}))
    rec = VideoRecord(video_id="v", source_path="", duration_s=1.0, frame_count=1)
    with pytest.raises(MalformedJson):
        synthesize_qa(rec, _stub_client(handler))


def test_synthesize_qa_extracts_array_after_prose():
    payload = "Here are your pairs:\n" + json.dumps(
        [{"question": f"q{i}?", "answer": f"a{i}"} for i in range(3)]) + "\nenjoy"

    def handler(url, p):
        return (200, json.dumps({"answer": payload}))

    rec = VideoRecord(video_id="v", source_path="", duration_s=1.0, frame_count=1)
    out = synthesize_qa(rec, _stub_client(handler))
    assert [ex.question for ex in out] == ["q0?", "q1?", "q2?"]


def _judge_client(reply):
    return _stub_client(lambda url, payload: (200, json.dumps({"answer": reply})))


def test_geval_parses_bare_integer():
    assert geval_judge("q", "truth", "gen", _judge_client("4")) == 4


def test_geval_parses_whitespace_wrapped():
    assert geval_judge("q", "truth", "gen", _judge_client(" 3\n")) == 3


def test_geval_parses_labeled_score():
    assert geval_judge("q", "truth", "gen", _judge_client("Score: 5")) == 5


def test_geval_out_of_range():
    with pytest.raises(ScoreOutOfRange):
        geval_judge("q", "truth", "gen", _judge_client("Score: 7"))


def test_geval_unparseable():
    with pytest.raises(UnparseableScore):
        geval_judge("q", "truth", "gen", _judge_client("excellent work"))


def test_geval_substitutes_placeholders():
    seen = {}

    def handler(url, payload):
        seen["prompt"] = payload["messages"][0]["content"][0]["text"]
        return (200, json.dumps({"answer": "2"}))

    geval_judge("why?", "because", "since", _stub_client(handler))
    assert "why?" in seen["prompt"]
    assert "because" in seen["prompt"]
    assert "since" in seen["prompt"]
    assert "{{" not in seen["prompt"]


def test_generation_results_round_trip(tmp_path, corpus):
    result = _retrieved(corpus)
    ctx = assemble_context("what is shown?", result, corpus["manifest"],
                           mode="video_only", seed=0)
    out = generate_answer(ctx, _stub_client())
    path = tmp_path / "answers.jsonl"
    save_generation_results([out], path)
    back = load_generation_results(path)
    assert back[0].query_id == out.query_id
    assert back[0].answer_text == out.answer_text
    assert back[0].context_digest == out.context_digest
