"""Query-time pipeline: classify, retrieve, expand, rerank, pack, render.

Stages, in order:

1. classify_query picks a query class and an adaptive top-k (multi-hop 15,
   temporal 12, simple 10).
2. coarse_retrieve scores every stored object with the hybrid score and
   keeps the top coarse_k.
3. expand_graph walks edges breadth-first from those hits, both directions
   and both edge kinds, with a 0.8 score decay per hop.
4. rerank_candidates orders candidates by a reranker backend, or by the
   hybrid score itself when no backend is configured, then cuts to k.
5. greedy_select packs rendered lines into the token budget, skipping lines
   that do not fit and continuing down the list.
6. build_injection renders the block: a header, one line per object grouped
   by kind, and a class-specific instruction paragraph when needed.

The token budget governs the object lines (the payload); the constant
header and instruction text sit outside it, which keeps a zero budget and
the mandatory header-only empty block consistent with each other.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Callable, Optional, Protocol, Sequence, runtime_checkable

from .core import CanvasGraph, CanvasObject, ObjectKind
from .errors import BackendFailureError
from .scoring import EmbedderBackend, HybridWeights, hybrid_score

logger = logging.getLogger(__name__)

EXPANSION_DECAY = 0.8
DEFAULT_COARSE_K = 20
DEFAULT_HOPS = 1
DEFAULT_BUDGET_TOKENS = 2000

INJECTION_HEADER = "=== conversation memory (format v1) ==="
KIND_ORDER = (
    ObjectKind.DECISION,
    ObjectKind.KEY_FACT,
    ObjectKind.REMINDER,
    ObjectKind.INSIGHT,
    ObjectKind.TODO,
)
REASONING_INSTRUCTION = (
    "Reasoning: analyze the items above, infer cause and effect between facts, "
    "reminders, insights, and decisions even when no explicit link is recorded, "
    "and lay out the causal chain in your answer."
)
TEMPORAL_INSTRUCTION = (
    "Dates: when an item above carries an explicit date or time expression, "
    "cite it verbatim in your answer."
)


class QueryClass(str, Enum):
    SIMPLE = "SIMPLE"
    TEMPORAL = "TEMPORAL"
    MULTI_HOP = "MULTI_HOP"


DEFAULT_K_MAP = {
    QueryClass.MULTI_HOP: 15,
    QueryClass.TEMPORAL: 12,
    QueryClass.SIMPLE: 10,
}


class Provenance(str, Enum):
    COARSE = "COARSE"
    EXPANDED = "EXPANDED"


@runtime_checkable
class RerankerBackend(Protocol):
    """Scores (id, text) candidates for a query; higher means more relevant."""

    def rerank(
        self, query_text: str, candidates: Sequence[tuple[str, str]]
    ) -> list[tuple[str, float]]:
        ...


def _read_lines(name: str) -> tuple[str, ...]:
    text = resources.files("canvasmem").joinpath(f"assets/{name}").read_text(encoding="utf-8")
    return tuple(line.strip() for line in text.splitlines() if line.strip())


@lru_cache(maxsize=1)
def default_causal_indicators() -> tuple[str, ...]:
    return _read_lines("causal_indicators.txt")


@lru_cache(maxsize=1)
def default_temporal_indicators() -> tuple[str, ...]:
    return _read_lines("temporal_indicators.txt")


def default_token_counter(text: str) -> int:
    """Crude token estimate: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


@dataclass
class RetrievalConfig:
    """Knobs for the retrieval pipeline; presets bundle common settings."""

    weights: HybridWeights = field(default_factory=HybridWeights)
    k_map: dict[QueryClass, int] = field(default_factory=lambda: dict(DEFAULT_K_MAP))
    coarse_k: int = DEFAULT_COARSE_K
    hops: int = DEFAULT_HOPS
    budget_tokens: int = DEFAULT_BUDGET_TOKENS
    causal_indicators: tuple[str, ...] = field(default_factory=default_causal_indicators)
    temporal_indicators: tuple[str, ...] = field(default_factory=default_temporal_indicators)

    def __post_init__(self):
        if self.coarse_k < 1:
            raise ValueError("coarse_k must be at least 1")
        if self.hops < 0:
            raise ValueError("hops must be non-negative")
        if self.budget_tokens < 0:
            raise ValueError("budget_tokens must be non-negative")
        for klass in QueryClass:
            if self.k_map.get(klass, 0) < 1:
                raise ValueError(f"k_map must give every query class a positive k, missing {klass}")

    @classmethod
    def preset(cls, name: str) -> "RetrievalConfig":
        """Named parameter bundles: "standard" (1 hop) and "locomo" (4 hops)."""
        if name == "standard":
            return cls()
        if name == "locomo":
            return cls(hops=4)
        raise ValueError(f"unknown retrieval preset {name!r}")


@dataclass
class QueryPlan:
    """Everything the pipeline needs to know about one query."""

    query_text: str
    query_embedding: list[float]
    klass: QueryClass
    k: int
    coarse_k: int = DEFAULT_COARSE_K
    hops: int = DEFAULT_HOPS
    budget_tokens: int = DEFAULT_BUDGET_TOKENS


@dataclass
class ScoredObject:
    """A candidate with its scores and where it came from."""

    object_id: str
    hybrid: float
    rerank: Optional[float] = None
    provenance: Provenance = Provenance.COARSE
    hop: int = 0


def _phrase_found(phrase: str, text: str) -> bool:
    return re.search(rf"\b{re.escape(phrase)}\b", text) is not None


def classify_query(
    query_text: str,
    causal_indicators: Sequence[str] | None = None,
    temporal_indicators: Sequence[str] | None = None,
    k_map: dict[QueryClass, int] | None = None,
) -> tuple[QueryClass, int]:
    """Case-insensitive phrase matching; causal indicators take precedence."""
    if not query_text.strip():
        raise ValueError("query text must be non-empty")
    causal = causal_indicators if causal_indicators is not None else default_causal_indicators()
    temporal = temporal_indicators if temporal_indicators is not None else default_temporal_indicators()
    kmap = k_map if k_map is not None else DEFAULT_K_MAP
    lowered = query_text.lower()
    if any(_phrase_found(p.lower(), lowered) for p in causal):
        klass = QueryClass.MULTI_HOP
    elif any(_phrase_found(p.lower(), lowered) for p in temporal):
        klass = QueryClass.TEMPORAL
    else:
        klass = QueryClass.SIMPLE
    return klass, kmap[klass]


def plan_query(
    query_text: str,
    embedder: EmbedderBackend,
    config: RetrievalConfig | None = None,
) -> QueryPlan:
    """Classify the query and embed it into a full pipeline plan."""
    if config is None:
        config = RetrievalConfig()
    klass, k = classify_query(
        query_text, config.causal_indicators, config.temporal_indicators, config.k_map
    )
    return QueryPlan(
        query_text=query_text,
        query_embedding=embedder.embed(query_text),
        klass=klass,
        k=k,
        coarse_k=config.coarse_k,
        hops=config.hops,
        budget_tokens=config.budget_tokens,
    )


def coarse_retrieve(
    graph: CanvasGraph,
    plan: QueryPlan,
    weights: HybridWeights | None = None,
) -> list[ScoredObject]:
    """Hybrid-score every object and keep the top coarse_k.

    Ties break on higher confidence, then lower turn, then id order, so the
    result is deterministic for any insertion order.
    """
    if weights is None:
        weights = HybridWeights()
    scored = [
        (hybrid_score(plan.query_embedding, plan.query_text, obj, weights), obj)
        for obj in graph.objects.values()
    ]
    scored.sort(key=lambda pair: (-pair[0], -pair[1].confidence, pair[1].turn, pair[1].id))
    return [
        ScoredObject(object_id=obj.id, hybrid=score)
        for score, obj in scored[: plan.coarse_k]
    ]


def expand_graph(
    graph: CanvasGraph,
    seeds: Sequence[ScoredObject],
    hops: int,
) -> list[ScoredObject]:
    """Breadth-first neighborhood expansion from the coarse hits.

    Both edge kinds count and edges are walked in both directions. An object
    first reached at hop distance d inherits the best adjacent score decayed
    by 0.8 per hop. Seeds come back unchanged, expansions are appended.
    """
    result = list(seeds)
    if hops <= 0 or not seeds:
        return result
    best_score: dict[str, float] = {s.object_id: s.hybrid for s in seeds}
    frontier: list[str] = [s.object_id for s in seeds]
    seen: set[str] = set(frontier)
    for hop in range(1, hops + 1):
        reached: dict[str, float] = {}
        for oid in frontier:
            for neighbor in graph.neighbors(oid):
                if neighbor in seen:
                    continue
                inherited = best_score[oid] * EXPANSION_DECAY
                if inherited > reached.get(neighbor, float("-inf")):
                    reached[neighbor] = inherited
        if not reached:
            break
        ordered = sorted(reached.items(), key=lambda item: (-item[1], item[0]))
        for oid, score in ordered:
            seen.add(oid)
            best_score[oid] = score
            result.append(
                ScoredObject(
                    object_id=oid,
                    hybrid=score,
                    provenance=Provenance.EXPANDED,
                    hop=hop,
                )
            )
        frontier = [oid for oid, _ in ordered]
    return result


def rerank_candidates(
    graph: CanvasGraph,
    backend: RerankerBackend | None,
    query_text: str,
    candidates: Sequence[ScoredObject],
    k: int,
) -> list[ScoredObject]:
    """Order candidates by rerank score and truncate to k.

    Without a backend the hybrid score itself is the rerank score, so the
    stage degrades to a pure hybrid ordering. A backend failure logs a
    warning and falls back the same way. Ties keep the hybrid order.
    """
    if not candidates:
        raise ValueError("rerank_candidates requires at least one candidate")
    base = sorted(candidates, key=lambda c: -c.hybrid)
    if backend is None:
        ranked = [replace(c, rerank=c.hybrid) for c in base]
        return ranked[:k]
    pairs = [
        (c.object_id, f"{graph.objects[c.object_id].content}\n{graph.objects[c.object_id].quote}")
        for c in base
    ]
    try:
        raw = backend.rerank(query_text, pairs)
    except Exception as exc:
        logger.warning("reranker backend failed, falling back to hybrid order: %s", exc)
        ranked = [replace(c, rerank=c.hybrid) for c in base]
        return ranked[:k]
    known = {c.object_id for c in base}
    scores = {cid: float(score) for cid, score in raw if cid in known}
    missing = float("-inf")
    rescored = [replace(c, rerank=scores.get(c.object_id, missing)) for c in base]
    rescored.sort(key=lambda c: -(c.rerank if c.rerank is not None else missing))
    return rescored[:k]


def render_object_line(obj: CanvasObject) -> str:
    """One injection line: kind tag, turn, verbatim quote, content."""
    return f'- [{obj.kind.value}] (turn {obj.turn}) "{obj.quote}" :: {obj.content}\n'


def greedy_select(
    graph: CanvasGraph,
    candidates: Sequence[ScoredObject],
    budget_tokens: int,
    token_counter: Callable[[str], int] = default_token_counter,
) -> list[ScoredObject]:
    """Pack candidates into the budget in order, skipping lines that do not fit.

    The cost of a candidate is the token count of its rendered line. A skip
    is not a stop: later, cheaper candidates still get their chance.
    """
    remaining = budget_tokens
    selected: list[ScoredObject] = []
    for cand in candidates:
        cost = token_counter(render_object_line(graph.objects[cand.object_id]))
        if cost <= remaining:
            selected.append(cand)
            remaining -= cost
    return selected


def build_injection(
    graph: CanvasGraph,
    selected: Sequence[ScoredObject],
    plan: QueryPlan,
) -> str:
    """Render the final context block.

    Lines are grouped by kind in a fixed order (decisions first, todos last)
    and keep their selection order within a group. Multi-hop plans append a
    reasoning instruction, temporal plans a date-citation instruction. An
    empty selection still renders the header so consumers can tell an empty
    memory apart from a missing one.
    """
    lines: list[str] = []
    for kind in KIND_ORDER:
        for cand in selected:
            obj = graph.objects[cand.object_id]
            if obj.kind is kind:
                lines.append(render_object_line(obj))
    block = INJECTION_HEADER + "\n" + "".join(lines)
    if plan.klass is QueryClass.MULTI_HOP:
        block += "\n" + REASONING_INSTRUCTION + "\n"
    elif plan.klass is QueryClass.TEMPORAL:
        block += "\n" + TEMPORAL_INSTRUCTION + "\n"
    return block


@dataclass
class RetrievalResult:
    """Intermediate and final products of one retrieve call."""

    plan: QueryPlan
    ranked: list[ScoredObject]
    selected: list[ScoredObject]
    injection: str


def retrieve_detailed(
    graph: CanvasGraph,
    query_text: str,
    embedder: EmbedderBackend,
    config: RetrievalConfig | None = None,
    reranker: RerankerBackend | None = None,
    token_counter: Callable[[str], int] = default_token_counter,
) -> RetrievalResult:
    """Run the full pipeline and keep the intermediate stages for inspection."""
    if config is None:
        config = RetrievalConfig()
    plan = plan_query(query_text, embedder, config)
    coarse = coarse_retrieve(graph, plan, config.weights)
    expanded = expand_graph(graph, coarse, plan.hops)
    if expanded:
        ranked = rerank_candidates(graph, reranker, plan.query_text, expanded, plan.k)
    else:
        ranked = []
    selected = greedy_select(graph, ranked, plan.budget_tokens, token_counter)
    injection = build_injection(graph, selected, plan)
    return RetrievalResult(plan=plan, ranked=ranked, selected=selected, injection=injection)


def retrieve(
    graph: CanvasGraph,
    query_text: str,
    embedder: EmbedderBackend,
    config: RetrievalConfig | None = None,
    reranker: RerankerBackend | None = None,
    token_counter: Callable[[str], int] = default_token_counter,
) -> str:
    """Full pipeline; returns just the injection block."""
    return retrieve_detailed(graph, query_text, embedder, config, reranker, token_counter).injection
