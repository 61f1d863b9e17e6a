"""Relevance scoring: cosine similarity, lexical overlap, and the hybrid blend.

The hybrid score is alpha * clamped_cosine + (1 - alpha) * keyword_score.
Keyword score measures query coverage: the fraction of the query's
content-bearing tokens that also appear in the object's content or quote.
Stopwords come from a fixed 50-word list shipped as a package asset.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .core import CanvasObject
from .errors import DimensionMismatchError, MissingEmbeddingError, ZeroVectorError

DEFAULT_ALPHA = 0.7
MOCK_EMBEDDING_DIM = 256

_TOKEN_RE = re.compile(r"[a-z0-9]+")


@runtime_checkable
class EmbedderBackend(Protocol):
    """Anything that maps text to a fixed-dimension embedding vector."""

    def embed(self, text: str) -> list[float]:
        ...


def _read_asset(name: str) -> str:
    return resources.files("canvasmem").joinpath(f"assets/{name}").read_text(encoding="utf-8")


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    """The fixed stopword list used for keyword scoring and lexical edges."""
    return frozenset(w.strip() for w in _read_asset("stopwords.txt").split() if w.strip())


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens; punctuation is dropped."""
    return _TOKEN_RE.findall(text.lower())


def content_tokens(text: str) -> list[str]:
    """Tokens with stopwords removed; order preserved."""
    stop = stopwords()
    return [tok for tok in tokenize(text) if tok not in stop]


@dataclass
class HybridWeights:
    """Blend weight for the hybrid score; alpha weights the semantic half."""

    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha!r}")


def cosine_sim(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity of two equal-length vectors.

    Raises DimensionMismatchError on length disagreement and ZeroVectorError
    when either vector has zero magnitude.
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise DimensionMismatchError(f"vector shapes differ: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ZeroVectorError("cosine similarity is undefined for zero vectors")
    return float(np.dot(va, vb) / (na * nb))


def keyword_score(query_text: str, obj: CanvasObject) -> float:
    """Fraction of the query's content tokens found in obj.content or obj.quote."""
    query = set(content_tokens(query_text))
    if not query:
        return 0.0
    target = set(content_tokens(obj.content + " " + obj.quote))
    return len(query & target) / len(query)


def keyword_jaccard(text_a: str, text_b: str) -> float:
    """Jaccard overlap of two texts on stopword-stripped tokens."""
    sa = set(content_tokens(text_a))
    sb = set(content_tokens(text_b))
    if not sa or not sb:
        return 0.0
    return len(sa & sb) / len(sa | sb)


def hybrid_score(
    query_embedding: Sequence[float],
    query_text: str,
    obj: CanvasObject,
    weights: HybridWeights | None = None,
) -> float:
    """Blend of clamped cosine similarity and keyword coverage, in [0, 1]."""
    if weights is None:
        weights = HybridWeights()
    if obj.embedding is None:
        raise MissingEmbeddingError(f"object {obj.id} has no embedding")
    semantic = cosine_sim(query_embedding, obj.embedding)
    semantic = min(1.0, max(0.0, semantic))
    lexical = keyword_score(query_text, obj)
    return weights.alpha * semantic + (1.0 - weights.alpha) * lexical


class MockEmbedder:
    """Deterministic offline embedder: a hashed bag-of-words vector.

    Every token is hashed into one of `dimension` buckets and counted; the
    vector is then L2-normalized. Hash collisions are acceptable, the point
    is determinism across runs and processes.
    """

    def __init__(self, dimension: int = MOCK_EMBEDDING_DIM):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def embed(self, text: str) -> list[float]:
        vec = [0.0] * self.dimension
        for token in tokenize(text):
            digest = hashlib.md5(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:4], "big") % self.dimension
            vec[bucket] += 1.0
        norm = math.sqrt(sum(v * v for v in vec))
        if norm == 0.0:
            # Tokenless input still gets a unit vector so cosine stays defined.
            vec[0] = 1.0
            return vec
        return [v / norm for v in vec]
