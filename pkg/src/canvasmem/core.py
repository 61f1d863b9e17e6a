"""Artifact data model: typed memory objects, edges, and the append-only graph.

A memory object is a tuple of (kind, content, verbatim quote, source speaker,
embedding, turn index, confidence). Object identity is a content hash of
(kind, normalized content, turn), so re-extracting the same statement from the
same turn collides on purpose and deduplicates. The graph is append-only:
objects and edges are added, never mutated or removed.
"""

from __future__ import annotations

import copy
import hashlib
import json
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from .errors import (
    InvalidObjectError,
    MalformedInputError,
    VersionMismatchError,
)

GRAPH_FORMAT = "canvas-graph"
GRAPH_VERSION = 1

ID_HEX_LENGTH = 16


class ObjectKind(str, Enum):
    DECISION = "DECISION"
    TODO = "TODO"
    KEY_FACT = "KEY_FACT"
    REMINDER = "REMINDER"
    INSIGHT = "INSIGHT"


class Source(str, Enum):
    USER = "USER"
    ASSISTANT = "ASSISTANT"


class EdgeKind(str, Enum):
    REFERENCE = "REFERENCE"
    CAUSAL = "CAUSAL"


class EdgeOrigin(str, Enum):
    SIMILARITY = "SIMILARITY"
    KEYWORD = "KEYWORD"
    TEMPORAL_HEURISTIC = "TEMPORAL_HEURISTIC"


class AddResult(str, Enum):
    ADDED = "ADDED"
    DUPLICATE = "DUPLICATE"


def normalize_text(text: str) -> str:
    """Collapse whitespace runs to single spaces, strip, and lowercase."""
    return " ".join(text.split()).lower()


def object_id(kind: ObjectKind, content: str, turn: int) -> str:
    """Content hash identifying an object; pure in (kind, normalized content, turn)."""
    payload = "\x1f".join((kind.value, normalize_text(content), str(turn)))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:ID_HEX_LENGTH]


@dataclass
class CanvasObject:
    """One extracted memory artifact, grounded in a verbatim quote."""

    kind: ObjectKind
    content: str
    quote: str
    source: Source
    turn: int
    confidence: float = 1.0
    embedding: Optional[list[float]] = None
    id: str = field(init=False)

    def __post_init__(self):
        self.validate()
        self.id = object_id(self.kind, self.content, self.turn)

    def validate(self) -> None:
        if not isinstance(self.kind, ObjectKind):
            raise InvalidObjectError(f"kind must be an ObjectKind, got {self.kind!r}")
        if not isinstance(self.source, Source):
            raise InvalidObjectError(f"source must be a Source, got {self.source!r}")
        if not isinstance(self.turn, int) or isinstance(self.turn, bool) or self.turn < 0:
            raise InvalidObjectError(f"turn must be a non-negative integer, got {self.turn!r}")
        if not isinstance(self.content, str):
            raise InvalidObjectError("content must be a string")
        if not isinstance(self.quote, str) or not normalize_text(self.quote):
            raise InvalidObjectError("quote must be a non-empty string")
        if not isinstance(self.confidence, (int, float)) or isinstance(self.confidence, bool):
            raise InvalidObjectError("confidence must be a number")
        if not 0.0 <= float(self.confidence) <= 1.0:
            raise InvalidObjectError(f"confidence must lie in [0, 1], got {self.confidence!r}")
        if self.embedding is not None:
            if not isinstance(self.embedding, list) or not self.embedding:
                raise InvalidObjectError("embedding must be a non-empty list of floats or None")


@dataclass(frozen=True)
class CanvasEdge:
    """A directed edge between two stored objects."""

    src: str
    dst: str
    kind: EdgeKind
    weight: float
    origin: EdgeOrigin

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError("edge endpoints must differ")
        if not isinstance(self.kind, EdgeKind):
            raise ValueError(f"kind must be an EdgeKind, got {self.kind!r}")
        if not isinstance(self.origin, EdgeOrigin):
            raise ValueError(f"origin must be an EdgeOrigin, got {self.origin!r}")
        if not 0.0 <= float(self.weight) <= 1.0:
            raise ValueError(f"edge weight must lie in [0, 1], got {self.weight!r}")


class CanvasGraph:
    """Append-only store of objects and edges with duplicate rejection.

    Concurrency model: single writer, many readers. Writers (ingestion) take
    the graph's lock; readers work on a snapshot() taken at call start.
    """

    def __init__(self):
        self.objects: dict[str, CanvasObject] = {}
        self.edges: list[CanvasEdge] = []
        self.next_turn: int = 0
        self.lock = threading.Lock()
        self._edge_keys: set[tuple[str, str, EdgeKind]] = set()
        self._adjacent: dict[str, list[str]] = {}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CanvasGraph):
            return NotImplemented
        return (
            self.objects == other.objects
            and self.edges == other.edges
            and self.next_turn == other.next_turn
        )

    def __len__(self) -> int:
        return len(self.objects)

    def add_object(self, obj: CanvasObject) -> AddResult:
        """Insert an object; a second insert of the same identity is a DUPLICATE."""
        obj.validate()
        if obj.id in self.objects:
            return AddResult.DUPLICATE
        self.objects[obj.id] = obj
        self.next_turn = max(self.next_turn, obj.turn + 1)
        return AddResult.ADDED

    def add_edge(self, edge: CanvasEdge) -> bool:
        """Insert an edge; returns False when the (src, dst, kind) triple exists."""
        if edge.src not in self.objects or edge.dst not in self.objects:
            raise ValueError("edge endpoints must reference stored objects")
        if edge.kind is EdgeKind.CAUSAL:
            if self.objects[edge.src].turn > self.objects[edge.dst].turn:
                raise ValueError("causal edges must point forward in time")
        key = (edge.src, edge.dst, edge.kind)
        if key in self._edge_keys:
            return False
        self._edge_keys.add(key)
        self.edges.append(edge)
        self._adjacent.setdefault(edge.src, []).append(edge.dst)
        self._adjacent.setdefault(edge.dst, []).append(edge.src)
        return True

    def neighbors(self, oid: str) -> list[str]:
        """Ids adjacent to oid across both edge kinds and both directions."""
        return list(self._adjacent.get(oid, ()))

    def mark_turn_ingested(self, index: int) -> None:
        """Advance the sequential ingestion cursor past a processed turn."""
        self.next_turn = max(self.next_turn, index + 1)

    def snapshot(self) -> "CanvasGraph":
        """Deep copy for readers; the original keeps accepting writes."""
        twin = CanvasGraph()
        twin.objects = {oid: copy.deepcopy(obj) for oid, obj in self.objects.items()}
        twin.edges = list(self.edges)
        twin.next_turn = self.next_turn
        twin._edge_keys = set(self._edge_keys)
        twin._adjacent = {oid: list(ids) for oid, ids in self._adjacent.items()}
        return twin

    def counts_by_kind(self) -> dict[str, int]:
        counts = {kind.value: 0 for kind in ObjectKind}
        for obj in self.objects.values():
            counts[obj.kind.value] += 1
        return counts

    def edge_counts_by_origin(self) -> dict[str, int]:
        counts = {origin.value: 0 for origin in EdgeOrigin}
        for edge in self.edges:
            counts[edge.origin.value] += 1
        return counts


def serialize_graph(graph: CanvasGraph) -> bytes:
    """Serialize to versioned UTF-8 JSON; floats keep full round-trip precision."""
    doc = {
        "format": GRAPH_FORMAT,
        "version": GRAPH_VERSION,
        "next_turn": graph.next_turn,
        "objects": [
            {
                "id": obj.id,
                "kind": obj.kind.value,
                "content": obj.content,
                "quote": obj.quote,
                "source": obj.source.value,
                "turn": obj.turn,
                "confidence": obj.confidence,
                "embedding": obj.embedding,
            }
            for obj in graph.objects.values()
        ],
        "edges": [
            {
                "src": edge.src,
                "dst": edge.dst,
                "kind": edge.kind.value,
                "weight": edge.weight,
                "origin": edge.origin.value,
            }
            for edge in graph.edges
        ],
    }
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise MalformedInputError(message)


def deserialize_graph(data: bytes) -> CanvasGraph:
    """Rebuild a graph from serialize_graph output.

    Raises MalformedInputError on truncation or schema violations and
    VersionMismatchError on an unsupported version number.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedInputError(f"graph data is not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "graph document must be a JSON object")
    _require(doc.get("format") == GRAPH_FORMAT, "unrecognized graph format tag")
    version = doc.get("version")
    if version != GRAPH_VERSION:
        raise VersionMismatchError(f"unsupported graph version {version!r}")
    _require(isinstance(doc.get("objects"), list), "objects must be a list")
    _require(isinstance(doc.get("edges"), list), "edges must be a list")
    _require(isinstance(doc.get("next_turn"), int) and doc["next_turn"] >= 0,
             "next_turn must be a non-negative integer")

    graph = CanvasGraph()
    for raw in doc["objects"]:
        _require(isinstance(raw, dict), "each object must be a JSON object")
        try:
            obj = CanvasObject(
                kind=ObjectKind(raw["kind"]),
                content=raw["content"],
                quote=raw["quote"],
                source=Source(raw["source"]),
                turn=raw["turn"],
                confidence=raw["confidence"],
                embedding=raw.get("embedding"),
            )
        except (KeyError, ValueError, TypeError, InvalidObjectError) as exc:
            raise MalformedInputError(f"invalid object record: {exc}") from exc
        _require(raw.get("id") == obj.id, f"object id {raw.get('id')!r} does not match its content hash")
        _require(graph.add_object(obj) is AddResult.ADDED, f"duplicate object id {obj.id}")
    for raw in doc["edges"]:
        _require(isinstance(raw, dict), "each edge must be a JSON object")
        try:
            edge = CanvasEdge(
                src=raw["src"],
                dst=raw["dst"],
                kind=EdgeKind(raw["kind"]),
                weight=raw["weight"],
                origin=EdgeOrigin(raw["origin"]),
            )
            added = graph.add_edge(edge)
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedInputError(f"invalid edge record: {exc}") from exc
        _require(added, f"duplicate edge {raw.get('src')!r} -> {raw.get('dst')!r}")
    graph.next_turn = max(graph.next_turn, doc["next_turn"])
    return graph
