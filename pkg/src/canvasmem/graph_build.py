"""Edge creation rules applied when a new object enters the graph.

Three rules run against every stored object:

R1: reference edges. Cosine at or above theta_ref makes a SIMILARITY
    reference edge weighted by the similarity; otherwise a Jaccard token
    overlap at or above keyword_edge_min makes a KEYWORD reference edge.
R2: causal edges for allowed kind pairs (for example KEY_FACT -> DECISION)
    when cosine reaches theta_causal and time order holds.
R3: temporal heuristic. A KEY_FACT or REMINDER within temporal_window turns
    before a DECISION gets a CAUSAL edge of weight 1.0 no matter how the
    embeddings look; nearby context tends to motivate decisions.

Edges are deduplicated per (src, dst, kind): similarity beats keyword for
references, and the heavier weight wins for causal edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import CanvasEdge, CanvasGraph, CanvasObject, EdgeKind, EdgeOrigin, ObjectKind
from .errors import MissingEmbeddingError
from .scoring import cosine_sim, keyword_jaccard

DEFAULT_THETA_REF = 0.5
DEFAULT_THETA_CAUSAL = 0.45
DEFAULT_KEYWORD_EDGE_MIN = 0.5
DEFAULT_TEMPORAL_WINDOW = 3

DEFAULT_CAUSAL_PAIRS: tuple[tuple[ObjectKind, ObjectKind], ...] = (
    (ObjectKind.KEY_FACT, ObjectKind.DECISION),
    (ObjectKind.REMINDER, ObjectKind.DECISION),
    (ObjectKind.INSIGHT, ObjectKind.DECISION),
    (ObjectKind.DECISION, ObjectKind.TODO),
)

TEMPORAL_SOURCE_KINDS = frozenset({ObjectKind.KEY_FACT, ObjectKind.REMINDER})


@dataclass
class LinkThresholds:
    """Tunables for the three edge rules."""

    theta_ref: float = DEFAULT_THETA_REF
    theta_causal: float = DEFAULT_THETA_CAUSAL
    keyword_edge_min: float = DEFAULT_KEYWORD_EDGE_MIN
    temporal_window: int = DEFAULT_TEMPORAL_WINDOW
    causal_pairs: tuple[tuple[ObjectKind, ObjectKind], ...] = DEFAULT_CAUSAL_PAIRS

    def __post_init__(self):
        if not 0.0 < self.theta_causal <= self.theta_ref < 1.0:
            raise ValueError(
                "thresholds must satisfy 0 < theta_causal <= theta_ref < 1, "
                f"got theta_ref={self.theta_ref!r} theta_causal={self.theta_causal!r}"
            )
        if not 0.0 <= self.keyword_edge_min <= 1.0:
            raise ValueError("keyword_edge_min must lie in [0, 1]")
        if not isinstance(self.temporal_window, int) or self.temporal_window < 1:
            raise ValueError("temporal_window must be a positive integer")


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, value))


def link_object(
    graph: CanvasGraph,
    new_obj: CanvasObject,
    thresholds: LinkThresholds | None = None,
) -> list[CanvasEdge]:
    """Apply R1, R2, and R3 between new_obj and every stored object.

    The new object must already be in the graph with an embedding, as must
    everything else that gets compared. Returns the edges actually added,
    in deterministic insertion order.
    """
    if thresholds is None:
        thresholds = LinkThresholds()
    if new_obj.embedding is None:
        raise MissingEmbeddingError(f"object {new_obj.id} has no embedding")
    added: list[CanvasEdge] = []
    for other in list(graph.objects.values()):
        if other.id == new_obj.id:
            continue
        if other.embedding is None:
            raise MissingEmbeddingError(f"stored object {other.id} has no embedding")
        sim = cosine_sim(other.embedding, new_obj.embedding)

        reference: CanvasEdge | None = None
        if sim >= thresholds.theta_ref:
            reference = CanvasEdge(
                src=other.id,
                dst=new_obj.id,
                kind=EdgeKind.REFERENCE,
                weight=_clamp01(sim),
                origin=EdgeOrigin.SIMILARITY,
            )
        else:
            overlap = keyword_jaccard(other.content, new_obj.content)
            if overlap >= thresholds.keyword_edge_min:
                reference = CanvasEdge(
                    src=other.id,
                    dst=new_obj.id,
                    kind=EdgeKind.REFERENCE,
                    weight=_clamp01(overlap),
                    origin=EdgeOrigin.KEYWORD,
                )

        causal: CanvasEdge | None = None
        if (
            (other.kind, new_obj.kind) in thresholds.causal_pairs
            and sim >= thresholds.theta_causal
            and other.turn <= new_obj.turn
        ):
            causal = CanvasEdge(
                src=other.id,
                dst=new_obj.id,
                kind=EdgeKind.CAUSAL,
                weight=_clamp01(sim),
                origin=EdgeOrigin.SIMILARITY,
            )
        if (
            other.kind in TEMPORAL_SOURCE_KINDS
            and new_obj.kind is ObjectKind.DECISION
            and 0 <= new_obj.turn - other.turn <= thresholds.temporal_window
        ):
            if causal is None or causal.weight < 1.0:
                causal = CanvasEdge(
                    src=other.id,
                    dst=new_obj.id,
                    kind=EdgeKind.CAUSAL,
                    weight=1.0,
                    origin=EdgeOrigin.TEMPORAL_HEURISTIC,
                )

        for edge in (reference, causal):
            if edge is not None and graph.add_edge(edge):
                added.append(edge)
    return added
