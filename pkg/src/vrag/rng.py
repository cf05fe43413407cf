"""Deterministic random streams.

Every stochastic step in the engine draws from a substream derived from one
root seed plus a tuple of string labels. Derivation hashes the seed and
labels with SHA-256, so streams are stable across platforms and insensitive
to the order in which other streams are created.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root_seed: int, *labels: str) -> int:
    """Collapse a root seed and a label path into a 64-bit stream seed."""
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode("utf-8"))
    for label in labels:
        h.update(b"\x00")
        h.update(label.encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def substream(root_seed: int, *labels: str) -> np.random.Generator:
    """Return an independent generator for the given label path."""
    return np.random.default_rng(derive_seed(root_seed, *labels))
