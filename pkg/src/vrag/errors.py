"""Exception hierarchy for the engine.

Three families map onto the CLI exit codes: validation problems (exit 1),
transport problems (exit 2), and on-disk data corruption (exit 3).
"""

from __future__ import annotations


class VragError(Exception):
    """Base class for all engine errors."""


# --- validation (exit code 1) -------------------------------------------------

class ValidationError(VragError):
    """Bad inputs, bad config, or a violated precondition."""


class SchemaViolation(ValidationError):
    def __init__(self, field: str, detail: str = ""):
        self.field = field
        msg = f"schema violation in field '{field}'"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DuplicateVideoId(ValidationError):
    def __init__(self, video_id: str):
        self.video_id = video_id
        super().__init__(f"duplicate video_id '{video_id}'")


class MissingFile(ValidationError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"file not found: {path}")


class DimMismatch(ValidationError):
    pass


class ZeroVector(ValidationError):
    pass


class AlphaOutOfRange(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class TooFewFrames(ValidationError):
    pass


class LabelOutOfRange(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class WrongMode(ValidationError):
    pass


class MissingQuery(ValidationError):
    pass


class TooFewSubsets(ValidationError):
    pass


class SpaceTooLarge(ValidationError):
    pass


class EmptyIndex(ValidationError):
    pass


class MissingTextEmbedding(ValidationError):
    def __init__(self, video_id: str):
        self.video_id = video_id
        super().__init__(f"video '{video_id}' has no text embedding and text weighting was requested")


class MissingTruth(ValidationError):
    def __init__(self, query_id: str):
        self.query_id = query_id
        super().__init__(f"no ground-truth entry for query '{query_id}'")


class EmptyRetrieval(ValidationError):
    pass


class MissingTranscript(ValidationError):
    def __init__(self, video_id: str):
        self.video_id = video_id
        super().__init__(f"video '{video_id}' has no subtitle or transcript and transcription is disabled")


class MissingFrameFile(ValidationError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"frame image not found: {path}")


class EmptyAnswer(ValidationError):
    pass


class MalformedJson(ValidationError):
    pass


class WrongCount(ValidationError):
    def __init__(self, n: int, expected: int = 3):
        self.n = n
        self.expected = expected
        super().__init__(f"expected {expected} question-answer pairs, got {n}")


class UnparseableScore(ValidationError):
    pass


class ScoreOutOfRange(ValidationError):
    def __init__(self, value: int):
        self.value = value
        super().__init__(f"judge score {value} outside 1-5")


class ConfigError(ValidationError):
    def __init__(self, field: str, detail: str):
        self.field = field
        super().__init__(f"config field '{field}': {detail}")


# --- transport (exit code 2) --------------------------------------------------

class TransportError(VragError):
    """Network-level failures talking to an external service."""


class TransportFailure(TransportError):
    pass


class GeneratorError(TransportError):
    def __init__(self, status: int, body):
        self.status = status
        self.body = body
        super().__init__(f"generator endpoint returned {status}: {str(body)[:200]}")


class AsrError(TransportError):
    def __init__(self, status: int, body):
        self.status = status
        self.body = body
        super().__init__(f"transcription endpoint returned {status}: {str(body)[:200]}")


# --- data corruption (exit code 3) --------------------------------------------

class DataCorruption(VragError):
    """A file on disk does not match its declared format."""


class IoFailure(DataCorruption):
    pass


class BadMagic(DataCorruption):
    pass


class UnsupportedVersion(DataCorruption):
    def __init__(self, version: int):
        self.version = version
        super().__init__(f"unsupported format version {version}")


class TruncatedFile(DataCorruption):
    def __init__(self, path, expected: int, actual: int):
        self.path = str(path)
        super().__init__(f"{path}: expected {expected} bytes, found {actual}")


class NonFiniteValue(DataCorruption):
    def __init__(self, row: int, col: int):
        self.row = row
        self.col = col
        super().__init__(f"non-finite value at row {row}, col {col}")


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the CLI exit code contract."""
    if isinstance(exc, DataCorruption):
        return 3
    if isinstance(exc, TransportError):
        return 2
    return 1
