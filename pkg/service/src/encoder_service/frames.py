"""Video decoding: fixed-rate frame sampling and JPEG export."""

from __future__ import annotations

import math
from pathlib import Path

import cv2
import numpy as np


class UndecodableMedia(Exception):
    """The file exists but cannot be decoded as video."""


def sample_frames(video_path: Path, fps: float = 1.0) -> tuple[list[np.ndarray], list[float]]:
    """Decode a clip and sample frames at a fixed rate.

    Samples floor(duration * fps) frames, at least one, at timestamps
    k / fps. Each sampled timestamp maps to the nearest source frame.

    Raises:
        UndecodableMedia: unreadable container, no frames, or a failed read.
    """
    cap = cv2.VideoCapture(str(video_path))
    try:
        if not cap.isOpened():
            raise UndecodableMedia(f"cannot open {video_path.name}")
        native_fps = cap.get(cv2.CAP_PROP_FPS)
        total = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
        if native_fps <= 0 or total <= 0:
            raise UndecodableMedia(f"no decodable frames in {video_path.name}")
        duration = total / native_fps
        count = max(1, math.floor(duration * fps))
        timestamps = [k / fps for k in range(count)]
        frames = []
        for ts in timestamps:
            src = min(total - 1, int(round(ts * native_fps)))
            cap.set(cv2.CAP_PROP_POS_FRAMES, src)
            ok, img = cap.read()
            if not ok or img is None:
                raise UndecodableMedia(f"read failed at {ts:.3f}s in {video_path.name}")
            frames.append(img)
        return frames, timestamps
    finally:
        cap.release()


def export_jpegs(frames: list[np.ndarray], video_id: str, frames_dir: Path) -> list[Path]:
    """Write sampled frames as <frames_dir>/<video_id>/<index>.jpg."""
    out_dir = frames_dir / video_id
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i, frame in enumerate(frames):
        path = out_dir / f"{i}.jpg"
        if not cv2.imwrite(str(path), frame):
            raise UndecodableMedia(f"failed to encode {path.name}")
        written.append(path)
    return written
