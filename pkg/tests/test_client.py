from __future__ import annotations

import json

import numpy as np
import pytest

from vrag.client import (
    EncoderClient,
    GeneratorClient,
    RecordingTransport,
    ReplayTransport,
    StubTransport,
    payload_digest,
)
from vrag.errors import AsrError, GeneratorError, TransportFailure, ValidationError
from vrag.stubs import STUB_DIM, encoder_handler, generator_handler, make_transport


def test_generator_client_round_trip():
    client = GeneratorClient(base_url="stub:gen", model="m",
                             transport=StubTransport(generator_handler))
    answer = client.chat([{"role": "user", "content": [
        {"type": "text", "text": "hello there"}]}])
    assert answer == "hello there"


def test_generator_client_http_error():
    client = GeneratorClient(base_url="stub:gen", model="m",
                             transport=StubTransport(lambda u, p: (500, json.dumps({"detail": "boom"}))))
    with pytest.raises(GeneratorError):
        client.chat([{"role": "user", "content": [{"type": "text", "text": "x"}]}])


def test_generator_client_malformed_reply():
    client = GeneratorClient(base_url="stub:gen", model="m",
                             transport=StubTransport(lambda u, p: (200, json.dumps({"nope": 1}))))
    with pytest.raises(GeneratorError):
        client.chat([{"role": "user", "content": [{"type": "text", "text": "x"}]}])


def test_encoder_client_endpoints():
    client = EncoderClient(base_url="stub:encoder",
                           transport=StubTransport(encoder_handler))
    health = client.healthz()
    assert health["status"] == "ok"
    assert health["dim"] == STUB_DIM

    reply = client.embed_text(["a cat", "a dog"])
    vectors = np.asarray(reply["embeddings"])
    assert vectors.shape == (2, STUB_DIM)
    assert reply["count"] == 2
    norms = np.linalg.norm(vectors, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-5)
    # deterministic text embedding
    again = np.asarray(client.embed_text(["a cat", "a dog"])["embeddings"])
    assert np.array_equal(vectors, again)

    frames = client.embed_frames("/media/clip.mp4", fps=1.0)
    ts = frames["timestamps"]
    assert ts == sorted(ts)
    assert len(frames["embeddings"]) == len(ts) == frames["count"]

    text = client.transcribe("/media/clip.mp4")
    assert "clip" in text["text"]
    assert text["segments"][0]["start_s"] == 0.0


def test_encoder_transcribe_error_is_asr_error():
    client = EncoderClient(base_url="stub:encoder",
                           transport=StubTransport(lambda u, p: (503, json.dumps({"detail": "down"}))))
    with pytest.raises(AsrError):
        client.transcribe("/media/x.mp4")


def test_record_replay_round_trip(tmp_path):
    tape = tmp_path / "tape.jsonl"
    inner = StubTransport(generator_handler)
    recording = RecordingTransport(inner, tape)
    client = GeneratorClient(base_url="stub:gen", model="m", transport=recording)
    first = client.chat([{"role": "user", "content": [{"type": "text", "text": "q1"}]}])
    assert tape.is_file() and len(tape.read_text().splitlines()) == 1

    replay = ReplayTransport(tape)
    client2 = GeneratorClient(base_url="stub:gen", model="m", transport=replay)
    second = client2.chat([{"role": "user", "content": [{"type": "text", "text": "q1"}]}])
    assert second == first
    with pytest.raises(TransportFailure):
        client2.chat([{"role": "user", "content": [{"type": "text", "text": "never recorded"}]}])


def test_payload_digest_is_stable():
    a = payload_digest("http://x/v1/chat", {"b": 1, "a": 2})
    b = payload_digest("http://x/v1/chat", {"a": 2, "b": 1})
    assert a == b
    c = payload_digest("http://x/v1/chat", {"a": 2, "b": 3})
    assert a != c


def test_make_transport_schemes(tmp_path):
    assert isinstance(make_transport("stub:gen"), StubTransport)
    assert isinstance(make_transport("stub:encoder"), StubTransport)
    with pytest.raises(ValidationError):
        make_transport("stub:nonsense")
    tape = tmp_path / "tape.jsonl"
    rec = make_transport("stub:gen", record_path=tape)
    assert isinstance(rec, RecordingTransport)
    tape.write_text("")
    assert isinstance(make_transport("stub:gen", replay_path=tape), ReplayTransport)


def test_stub_generator_serves_judge_and_qa_prompts():
    from vrag.generation import load_prompt
    client = GeneratorClient(base_url="stub:gen", model="m",
                             transport=StubTransport(generator_handler))
    judge_prompt = (load_prompt("geval")
                    .replace("{{Question}}", "q")
                    .replace("{{Ground_Truth_Answer}}", "t")
                    .replace("{{Generated_Response}}", "g"))
    reply = client.chat([{"role": "user", "content": [{"type": "text", "text": judge_prompt}]}])
    assert reply.strip() in {"1", "2", "3", "4", "5"}

    qa_prompt = load_prompt("synthetic_qa") + "\nvideo: v0"
    reply = client.chat([{"role": "user", "content": [{"type": "text", "text": qa_prompt}]}])
    arr = json.loads(reply)
    assert len(arr) == 3
