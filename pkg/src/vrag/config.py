"""Engine configuration: one JSON file, flag overrides, strict validation."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, MissingFile


@dataclass
class RetrievalSection:
    k: int = 1
    frames_per_video: int = 4
    candidates: int = 8
    n_subsets: int = 10


@dataclass
class GenerationSection:
    frames_per_video: int = 32
    candidates: int = 64
    n_subsets: int = 40
    mode: str = "video_only"


@dataclass
class SelectorSection:
    retrieval_path: str | None = None
    generation_path: str | None = None


@dataclass
class EndpointsSection:
    encoder_url: str = "stub:encoder"
    generator_url: str = "stub:gen"
    generator_model: str = "stub-model"


@dataclass
class EngineConfig:
    manifest_path: str = "manifest.json"
    alpha: float = 0.6
    retrieval: RetrievalSection = field(default_factory=RetrievalSection)
    generation: GenerationSection = field(default_factory=GenerationSection)
    selector: SelectorSection = field(default_factory=SelectorSection)
    endpoints: EndpointsSection = field(default_factory=EndpointsSection)
    seed: int = 0
    max_inflight: int = 4


def _expect(cond: bool, fieldname: str, detail: str) -> None:
    if not cond:
        raise ConfigError(fieldname, detail)


def validate_config(cfg: EngineConfig) -> EngineConfig:
    _expect(isinstance(cfg.manifest_path, str) and cfg.manifest_path != "",
            "manifest_path", "must be a non-empty path")
    _expect(isinstance(cfg.alpha, (int, float)) and 0.0 <= cfg.alpha <= 1.0,
            "alpha", "must lie in [0, 1]")
    r = cfg.retrieval
    _expect(isinstance(r.k, int) and r.k >= 1, "retrieval.k", "must be an integer >= 1")
    _expect(isinstance(r.frames_per_video, int) and r.frames_per_video >= 1,
            "retrieval.frames_per_video", "must be an integer >= 1")
    _expect(isinstance(r.candidates, int) and r.candidates >= 1,
            "retrieval.candidates", "must be an integer >= 1")
    _expect(r.frames_per_video <= r.candidates,
            "retrieval.frames_per_video", "must not exceed retrieval.candidates")
    _expect(isinstance(r.n_subsets, int) and r.n_subsets >= 1,
            "retrieval.n_subsets", "must be an integer >= 1")
    g = cfg.generation
    _expect(isinstance(g.frames_per_video, int) and g.frames_per_video >= 1,
            "generation.frames_per_video", "must be an integer >= 1")
    _expect(isinstance(g.candidates, int) and g.candidates >= 1,
            "generation.candidates", "must be an integer >= 1")
    _expect(g.frames_per_video <= g.candidates,
            "generation.frames_per_video", "must not exceed generation.candidates")
    _expect(isinstance(g.n_subsets, int) and g.n_subsets >= 1,
            "generation.n_subsets", "must be an integer >= 1")
    _expect(g.mode in ("video_only", "video_plus_text"),
            "generation.mode", "must be 'video_only' or 'video_plus_text'")
    _expect(isinstance(cfg.seed, int), "seed", "must be an integer")
    _expect(isinstance(cfg.max_inflight, int) and cfg.max_inflight >= 1,
            "max_inflight", "must be an integer >= 1")
    for name in ("encoder_url", "generator_url"):
        _expect(isinstance(getattr(cfg.endpoints, name), str) and getattr(cfg.endpoints, name),
                f"endpoints.{name}", "must be a non-empty URL")
    return cfg


_SECTION_FIELDS = {
    "retrieval": ("k", "frames_per_video", "candidates", "n_subsets"),
    "generation": ("frames_per_video", "candidates", "n_subsets", "mode"),
    "selector": ("retrieval_path", "generation_path"),
    "endpoints": ("encoder_url", "generator_url", "generator_model"),
}


def config_from_dict(obj: dict) -> EngineConfig:
    if not isinstance(obj, dict):
        raise ConfigError("$", "config must be a JSON object")
    known_top = {"manifest_path", "alpha", "seed", "max_inflight", *_SECTION_FIELDS}
    for key in obj:
        if key not in known_top:
            raise ConfigError(key, "unknown config field")
    cfg = EngineConfig()
    for key in ("manifest_path", "alpha", "seed", "max_inflight"):
        if key in obj:
            setattr(cfg, key, obj[key])
    for section, fields in _SECTION_FIELDS.items():
        if section not in obj:
            continue
        sub = obj[section]
        if not isinstance(sub, dict):
            raise ConfigError(section, "must be an object")
        target = getattr(cfg, section)
        for key in sub:
            if key not in fields:
                raise ConfigError(f"{section}.{key}", "unknown config field")
            setattr(target, key, sub[key])
    return validate_config(cfg)


def load_config(path) -> EngineConfig:
    p = Path(path)
    if not p.is_file():
        raise MissingFile(p)
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"config is not valid JSON: {exc}") from exc
    return config_from_dict(obj)


def apply_overrides(cfg: EngineConfig, overrides: dict) -> EngineConfig:
    """Apply dotted-path overrides (flag values win over file values).

    The input config is left untouched; a validated copy is returned.
    ``None`` values mean "flag not given" and are skipped.
    """
    out = copy.deepcopy(cfg)
    for path, value in overrides.items():
        if value is None:
            continue
        parts = path.split(".")
        target = out
        for part in parts[:-1]:
            if not hasattr(target, part):
                raise ConfigError(path, "unknown config field")
            target = getattr(target, part)
        if not hasattr(target, parts[-1]):
            raise ConfigError(path, "unknown config field")
        setattr(target, parts[-1], value)
    return validate_config(out)
