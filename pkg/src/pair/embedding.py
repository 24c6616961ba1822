"""Deterministic hashed bag-of-tokens text embedding.

Texts are lowercased and split on non-alphanumeric runs.  Each token adds
sign(t) * 1.0 at index fnv1a64(t) mod DIMENSIONS, where the sign is +1 when
bit 0 of a second hashing round (fnv1a64 over the first digest's 8 bytes,
little-endian) is 0 and -1 otherwise.  The result is L2-normalized unless it
is the zero vector.  No randomness, no platform-dependent hashing: the same
text embeds to the same vector everywhere.
"""

from __future__ import annotations

from functools import lru_cache
import re
from typing import Protocol

import numpy as np

from .errors import ContractViolation

DIMENSIONS = 256

_TOKEN_RE = re.compile(r"[a-z0-9]+")

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric tokens, in order of appearance."""
    return _TOKEN_RE.findall(text.lower())


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _U64
    return h


@lru_cache(maxsize=65536)
def _token_slot(token: str, dimensions: int) -> tuple[int, float]:
    first = fnv1a64(token.encode("utf-8"))
    second = fnv1a64(first.to_bytes(8, "little"))
    sign = 1.0 if second & 1 == 0 else -1.0
    return first % dimensions, sign


class Embedder(Protocol):
    """Anything that turns text into a fixed-width float vector."""

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Signed feature hashing over token counts.

    Embeddings are cached per text; cached arrays are marked read-only so
    callers cannot corrupt the cache.
    """

    def __init__(self, dimensions: int = DIMENSIONS):
        if dimensions <= 0:
            raise ContractViolation(f"dimensions must be positive, got {dimensions}")
        self.dimensions = dimensions
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, text: str) -> np.ndarray:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        vec = np.zeros(self.dimensions, dtype=np.float64)
        for token in tokenize(text):
            index, sign = _token_slot(token, self.dimensions)
            vec[index] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        vec.setflags(write=False)
        self._cache[text] = vec
        return vec


DEFAULT_EMBEDDER = HashingEmbedder()


def embed_text(text: str, embedder: Embedder | None = None) -> np.ndarray:
    return (embedder or DEFAULT_EMBEDDER).embed(text)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of two vectors; 0.0 when either has zero norm.

    The result is clamped into [-1, 1] so downstream comparisons never see
    float spill past the mathematical range.
    """
    if a.shape != b.shape:
        raise ContractViolation(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    value = float(np.dot(a, b)) / (norm_a * norm_b)
    return max(-1.0, min(1.0, value))


def semantic_similarity(text_a: str, text_b: str, embedder: Embedder | None = None) -> float:
    """Cosine similarity of the two texts' embeddings."""
    active = embedder or DEFAULT_EMBEDDER
    return cosine_similarity(active.embed(text_a), active.embed(text_b))
