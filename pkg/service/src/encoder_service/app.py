"""HTTP surface: embedding and transcription endpoints.

Stateless by construction: each request decodes and embeds with pure
functions, so identical requests produce identical responses and the
worker pool needs no shared mutable state or locks.

Error bodies are always ``{"error": message}``: 400 for an empty batch,
404 for a missing media path, 413 for an oversize batch, 422 for media
that cannot be decoded or has no audio track, 500 for backend failures.
"""

from __future__ import annotations

import argparse
import os
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backends import (
    DIM,
    ENCODER_ID,
    MalformedTranscript,
    NoAudioTrack,
    embed_frame,
    embed_text,
    transcribe,
)
from .frames import UndecodableMedia, export_jpegs, sample_frames

MAX_TEXTS = 64
MAX_TEXT_CHARS = 8192


class TextRequest(BaseModel):
    texts: list[str]


class FramesRequest(BaseModel):
    video_path: str
    fps: float = 1.0


class TranscribeRequest(BaseModel):
    video_path: str


def create_app(frames_dir: Path | None = None) -> FastAPI:
    """Build the service app; frames_dir enables JPEG export of samples."""
    if frames_dir is None and os.environ.get("ENCODER_FRAMES_DIR"):
        frames_dir = Path(os.environ["ENCODER_FRAMES_DIR"])
    app = FastAPI(title="encoder-service")

    @app.exception_handler(HTTPException)
    async def _error_body(request: Request, exc: HTTPException):
        return JSONResponse(status_code=exc.status_code,
                            content={"error": str(exc.detail)})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "encoder_id": ENCODER_ID, "dim": DIM}

    @app.post("/v1/embed/text")
    def embed_text_batch(req: TextRequest):
        if not req.texts:
            raise HTTPException(400, "texts must be a non-empty list")
        if len(req.texts) > MAX_TEXTS:
            raise HTTPException(413, f"at most {MAX_TEXTS} texts per batch")
        if any(len(t) > MAX_TEXT_CHARS for t in req.texts):
            raise HTTPException(413, f"each text must be <= {MAX_TEXT_CHARS} characters")
        try:
            embeddings = [embed_text(t).tolist() for t in req.texts]
        except Exception as exc:
            raise HTTPException(500, f"text encoder failure: {exc}")
        return {"dim": DIM, "count": len(embeddings), "embeddings": embeddings}

    @app.post("/v1/embed/frames")
    def embed_frames(req: FramesRequest):
        path = Path(req.video_path)
        if not path.is_file():
            raise HTTPException(404, f"no such file: {req.video_path}")
        if req.fps <= 0:
            raise HTTPException(400, "fps must be > 0")
        try:
            frames, timestamps = sample_frames(path, req.fps)
        except UndecodableMedia as exc:
            raise HTTPException(422, str(exc))
        try:
            embeddings = [embed_frame(f).tolist() for f in frames]
            if frames_dir is not None:
                export_jpegs(frames, path.stem, frames_dir)
        except Exception as exc:
            raise HTTPException(500, f"vision encoder failure: {exc}")
        return {"dim": DIM, "count": len(embeddings),
                "embeddings": embeddings, "timestamps": timestamps}

    @app.post("/v1/transcribe")
    def transcribe_clip(req: TranscribeRequest):
        path = Path(req.video_path)
        if not path.is_file():
            raise HTTPException(404, f"no such file: {req.video_path}")
        try:
            result = transcribe(path)
        except NoAudioTrack as exc:
            raise HTTPException(422, str(exc))
        except MalformedTranscript as exc:
            raise HTTPException(500, str(exc))
        return {"text": result.text, "segments": result.segments}

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="encoder-service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8900)
    parser.add_argument("--frames-dir", type=Path, default=None,
                        help="export sampled frames as JPEGs under this directory")
    args = parser.parse_args(argv)
    import uvicorn

    uvicorn.run(create_app(args.frames_dir), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
