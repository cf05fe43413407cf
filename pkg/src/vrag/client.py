"""HTTP client machinery for the generator, judge, ASR, and encoder endpoints.

Every remote call goes through a Transport, which maps (url, JSON payload)
to (status, body text). The default transport speaks real HTTP via
requests; tests and offline runs plug in stubs, and any transport can be
wrapped for record/replay so recorded sessions replay byte-identically.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import AsrError, GeneratorError, IoFailure, MissingFile, TransportFailure


def payload_digest(url: str, payload: dict) -> str:
    blob = json.dumps({"url": url, "payload": payload},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class HttpTransport:
    def __init__(self, timeout: float = 60.0):
        self.timeout = timeout

    def post(self, url: str, payload: dict) -> tuple[int, str]:
        try:
            resp = requests.post(url, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportFailure(f"POST {url} failed: {exc}") from exc
        return resp.status_code, resp.text

    def get(self, url: str) -> tuple[int, str]:
        try:
            resp = requests.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportFailure(f"GET {url} failed: {exc}") from exc
        return resp.status_code, resp.text


class StubTransport:
    """In-process transport driven by a handler(url, payload) callable."""

    def __init__(self, handler):
        self.handler = handler
        self.calls: list[tuple[str, dict]] = []

    def post(self, url: str, payload: dict) -> tuple[int, str]:
        self.calls.append((url, payload))
        return self.handler(url, payload)

    def get(self, url: str) -> tuple[int, str]:
        self.calls.append((url, {}))
        return self.handler(url, {})


class RecordingTransport:
    """Pass-through transport that appends every exchange to a JSONL file."""

    def __init__(self, inner, path):
        self.inner = inner
        self.path = Path(path)

    def _record(self, url: str, payload: dict, status: int, body: str) -> None:
        row = {"digest": payload_digest(url, payload), "url": url,
               "status": status, "body": body}
        try:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(row) + "\n")
        except OSError as exc:
            raise IoFailure(f"cannot record to {self.path}: {exc}") from exc

    def post(self, url: str, payload: dict) -> tuple[int, str]:
        status, body = self.inner.post(url, payload)
        self._record(url, payload, status, body)
        return status, body

    def get(self, url: str) -> tuple[int, str]:
        status, body = self.inner.get(url)
        self._record(url, {}, status, body)
        return status, body


class ReplayTransport:
    """Serve responses from a recording; unknown requests fail loudly."""

    def __init__(self, path):
        p = Path(path)
        if not p.is_file():
            raise MissingFile(p)
        self.responses: dict[str, tuple[int, str]] = {}
        for line in p.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            self.responses[row["digest"]] = (int(row["status"]), row["body"])

    def post(self, url: str, payload: dict) -> tuple[int, str]:
        digest = payload_digest(url, payload)
        if digest not in self.responses:
            raise TransportFailure(f"no recorded response for POST {url}")
        return self.responses[digest]

    def get(self, url: str) -> tuple[int, str]:
        return self.post(url, {})


@dataclass
class GeneratorClient:
    """Talks to the answer/judge endpoint: POST <base>/v1/chat."""

    base_url: str
    model: str = "generator"
    transport: object = field(default_factory=HttpTransport)

    def chat(self, messages: list[dict]) -> str:
        url = self.base_url.rstrip("/") + "/v1/chat"
        payload = {"model": self.model, "messages": messages}
        status, body = self.transport.post(url, payload)
        if status != 200:
            raise GeneratorError(status, body)
        try:
            obj = json.loads(body)
            answer = obj["answer"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise GeneratorError(status, f"malformed generator response: {body[:200]}") from exc
        if not isinstance(answer, str):
            raise GeneratorError(status, "generator answer is not a string")
        return answer


@dataclass
class EncoderClient:
    """Talks to the embedding/ASR service."""

    base_url: str
    transport: object = field(default_factory=HttpTransport)

    def _post(self, route: str, payload: dict) -> dict:
        url = self.base_url.rstrip("/") + route
        status, body = self.transport.post(url, payload)
        if status != 200:
            if route == "/v1/transcribe":
                raise AsrError(status, body)
            raise TransportFailure(f"encoder {route} returned {status}: {body[:200]}")
        try:
            return json.loads(body)
        except json.JSONDecodeError as exc:
            raise TransportFailure(f"encoder {route} returned invalid JSON") from exc

    def embed_text(self, texts: list[str]) -> dict:
        return self._post("/v1/embed/text", {"texts": texts})

    def embed_frames(self, video_path: str, fps: float = 1.0) -> dict:
        return self._post("/v1/embed/frames", {"video_path": video_path, "fps": fps})

    def transcribe(self, video_path: str) -> dict:
        return self._post("/v1/transcribe", {"video_path": video_path})

    def healthz(self) -> dict:
        url = self.base_url.rstrip("/") + "/healthz"
        status, body = self.transport.get(url)
        if status != 200:
            raise TransportFailure(f"encoder /healthz returned {status}")
        try:
            return json.loads(body)
        except json.JSONDecodeError as exc:
            raise TransportFailure("encoder /healthz returned invalid JSON") from exc
