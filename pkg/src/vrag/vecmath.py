"""Small vector helpers shared by retrieval and the selector.

All accumulation happens in float64 regardless of input dtype.
"""

from __future__ import annotations

import numpy as np

from .errors import AlphaOutOfRange, DimMismatch, EmptyInput, ZeroVector

_ZERO_TOL = 1e-12


def _as_f64_vector(x, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimMismatch(f"{name} must be 1-d, got shape {arr.shape}")
    return arr


def l2_normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm.

    Raises:
        ZeroVector: if the norm is numerically zero.
    """
    arr = _as_f64_vector(v)
    norm = float(np.linalg.norm(arr))
    if norm < _ZERO_TOL:
        raise ZeroVector("cannot normalize a zero vector")
    return arr / norm


def cosine(a, b) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1]."""
    va = _as_f64_vector(a, "a")
    vb = _as_f64_vector(b, "b")
    if va.shape[0] != vb.shape[0]:
        raise DimMismatch(f"dim mismatch: {va.shape[0]} vs {vb.shape[0]}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na < _ZERO_TOL or nb < _ZERO_TOL:
        raise ZeroVector("cosine undefined for a zero vector")
    sim = float(np.dot(va, vb) / (na * nb))
    return max(-1.0, min(1.0, sim))


def mean_pool(vectors) -> np.ndarray:
    """Componentwise mean of a sequence of equal-dimension vectors.

    Accepts a 2-d array or an iterable of 1-d vectors.

    Raises:
        EmptyInput: on an empty sequence.
        DimMismatch: if the vectors disagree on dimension.
    """
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        if vectors.shape[0] == 0:
            raise EmptyInput("mean_pool of zero vectors")
        return vectors.astype(np.float64, copy=False).mean(axis=0)
    rows = [_as_f64_vector(v) for v in vectors]
    if not rows:
        raise EmptyInput("mean_pool of zero vectors")
    dim = rows[0].shape[0]
    for r in rows[1:]:
        if r.shape[0] != dim:
            raise DimMismatch(f"dim mismatch in mean_pool: {dim} vs {r.shape[0]}")
    return np.stack(rows).mean(axis=0)


def interpolate_ensemble(text_vec, visual_vec, alpha: float) -> np.ndarray:
    """Blend unit-norm text and visual vectors and re-normalize.

    Computes ``alpha * text + (1 - alpha) * visual`` and scales the result
    back to unit norm. Inputs must already be unit vectors.

    Raises:
        AlphaOutOfRange: if alpha is outside [0, 1].
        DimMismatch: if dimensions disagree.
        ZeroVector: if an input is not unit norm (within 1e-6) or the blend
            cancels to zero.
    """
    if not (0.0 <= alpha <= 1.0):
        raise AlphaOutOfRange(f"alpha must lie in [0, 1], got {alpha}")
    t = _as_f64_vector(text_vec, "text_vec")
    v = _as_f64_vector(visual_vec, "visual_vec")
    if t.shape[0] != v.shape[0]:
        raise DimMismatch(f"dim mismatch: {t.shape[0]} vs {v.shape[0]}")
    for name, u in (("text_vec", t), ("visual_vec", v)):
        if abs(float(np.linalg.norm(u)) - 1.0) > 1e-6:
            raise ZeroVector(f"{name} must be unit norm before blending")
    blended = alpha * t + (1.0 - alpha) * v
    return l2_normalize(blended)
