"""Embedding and transcription microservice for the video retrieval engine."""

from .app import create_app
from .backends import DIM, ENCODER_ID, embed_frame, embed_text, transcribe

__version__ = "0.1.0"
__all__ = ["create_app", "DIM", "ENCODER_ID", "embed_frame", "embed_text", "transcribe"]
