from __future__ import annotations

import math

import pytest

from canvasmem.core import CanvasEdge, CanvasGraph, EdgeKind, EdgeOrigin, ObjectKind
from canvasmem.retrieval import (
    DEFAULT_BUDGET_TOKENS,
    DEFAULT_COARSE_K,
    EXPANSION_DECAY,
    INJECTION_HEADER,
    REASONING_INSTRUCTION,
    TEMPORAL_INSTRUCTION,
    Provenance,
    QueryClass,
    QueryPlan,
    RetrievalConfig,
    ScoredObject,
    build_injection,
    classify_query,
    coarse_retrieve,
    default_token_counter,
    expand_graph,
    greedy_select,
    render_object_line,
    rerank_candidates,
    retrieve,
    retrieve_detailed,
)
from canvasmem.scoring import MockEmbedder

from conftest import axis, graph_of, make_obj


def test_default_token_counter_rounds_up():
    assert default_token_counter("") == 0
    assert default_token_counter("abcd") == 1
    assert default_token_counter("abcde") == 2
    assert default_token_counter("x" * 8) == 2


@pytest.mark.parametrize(
    "query,expected_class,expected_k",
    [
        ("Why did we choose Redis?", QueryClass.MULTI_HOP, 15),
        ("What led to the outage?", QueryClass.MULTI_HOP, 15),
        ("When did Caroline attend the support group?", QueryClass.TEMPORAL, 12),
        ("How long does the build take?", QueryClass.TEMPORAL, 12),
        ("What is the cache TTL?", QueryClass.SIMPLE, 10),
        ("List the open reminders.", QueryClass.SIMPLE, 10),
    ],
)
def test_classify_query_fixtures(query, expected_class, expected_k):
    assert classify_query(query) == (expected_class, expected_k)


def test_classify_query_causal_precedence_over_temporal():
    # "why did" and "when" both appear; causal indicators win.
    klass, k = classify_query("When it broke, why did the cache misbehave?")
    assert klass is QueryClass.MULTI_HOP and k == 15


def test_classify_query_respects_word_boundaries():
    # "whenever" must not trigger the "when" indicator.
    assert classify_query("Whenever convenient, share the doc")[0] is QueryClass.SIMPLE
    # "aftermath" must not trigger "after".
    assert classify_query("Describe the aftermath in the report")[0] is QueryClass.SIMPLE


def test_classify_query_is_case_insensitive():
    assert classify_query("WHY DID the tests fail?")[0] is QueryClass.MULTI_HOP


def test_classify_query_rejects_empty():
    with pytest.raises(ValueError):
        classify_query("   ")


def test_classify_query_accepts_custom_indicators_and_k_map():
    klass, k = classify_query(
        "what changed upstream?",
        causal_indicators=("changed",),
        temporal_indicators=(),
        k_map={QueryClass.MULTI_HOP: 3, QueryClass.TEMPORAL: 2, QueryClass.SIMPLE: 1},
    )
    assert klass is QueryClass.MULTI_HOP and k == 3


def test_retrieval_config_presets():
    standard = RetrievalConfig.preset("standard")
    locomo = RetrievalConfig.preset("locomo")
    assert standard.hops == 1
    assert locomo.hops == 4
    assert standard.coarse_k == locomo.coarse_k == DEFAULT_COARSE_K
    assert standard.budget_tokens == DEFAULT_BUDGET_TOKENS
    with pytest.raises(ValueError):
        RetrievalConfig.preset("turbo")


def test_retrieval_config_validation():
    with pytest.raises(ValueError):
        RetrievalConfig(coarse_k=0)
    with pytest.raises(ValueError):
        RetrievalConfig(hops=-1)
    with pytest.raises(ValueError):
        RetrievalConfig(budget_tokens=-5)
    with pytest.raises(ValueError):
        RetrievalConfig(k_map={QueryClass.SIMPLE: 10})


def _plan(query="the probe query", klass=QueryClass.SIMPLE, **kwargs):
    defaults = dict(query_text=query, query_embedding=axis(0), klass=klass, k=10)
    defaults.update(kwargs)
    return QueryPlan(**defaults)


def test_coarse_retrieve_orders_by_hybrid_then_ties():
    graph = CanvasGraph()
    # Same embedding and no lexical overlap: scores tie exactly.
    strong = make_obj(content="orange", turn=5, embedding=axis(0), confidence=1.0)
    weaker = make_obj(content="violet", turn=2, embedding=axis(0), confidence=0.4)
    later = make_obj(content="maroon", turn=9, embedding=axis(0), confidence=1.0)
    offaxis = make_obj(content="indigo", turn=0, embedding=axis(1))
    for obj in (strong, weaker, later, offaxis):
        graph.add_object(obj)
    hits = coarse_retrieve(graph, _plan())
    # Ties: higher confidence first, then lower turn; zero-cosine object last.
    assert [h.object_id for h in hits] == [strong.id, later.id, weaker.id, offaxis.id]
    assert hits[0].hybrid == pytest.approx(0.7)
    assert all(h.provenance is Provenance.COARSE for h in hits)


def test_coarse_retrieve_caps_at_coarse_k():
    graph = CanvasGraph()
    for turn in range(30):
        graph.add_object(make_obj(content=f"item {turn}", turn=turn, embedding=axis(0)))
    hits = coarse_retrieve(graph, _plan(coarse_k=20))
    assert len(hits) == 20
    assert [graph.objects[h.object_id].turn for h in hits] == list(range(20))


def _reference(graph, a, b, weight=0.9):
    graph.add_edge(CanvasEdge(src=a.id, dst=b.id, kind=EdgeKind.REFERENCE,
                              weight=weight, origin=EdgeOrigin.SIMILARITY))


def test_expand_graph_decays_and_tracks_hops():
    a = make_obj(content="seed item", turn=0, embedding=axis(0))
    b = make_obj(content="one hop out", turn=1, embedding=axis(1))
    c = make_obj(content="two hops out", turn=2, embedding=axis(2))
    graph = graph_of(a, b, c)
    _reference(graph, a, b)
    _reference(graph, b, c)
    seeds = [ScoredObject(object_id=a.id, hybrid=1.0)]
    out = expand_graph(graph, seeds, hops=2)
    assert [(o.object_id, o.hop) for o in out] == [(a.id, 0), (b.id, 1), (c.id, 2)]
    assert out[1].hybrid == pytest.approx(EXPANSION_DECAY)
    assert out[2].hybrid == pytest.approx(EXPANSION_DECAY ** 2)
    assert out[1].provenance is Provenance.EXPANDED


def test_expand_graph_hop_budget_and_identity():
    a = make_obj(content="seed item", turn=0, embedding=axis(0))
    b = make_obj(content="one hop out", turn=1, embedding=axis(1))
    graph = graph_of(a, b)
    _reference(graph, a, b)
    seeds = [ScoredObject(object_id=a.id, hybrid=1.0)]
    assert expand_graph(graph, seeds, hops=0) == seeds
    assert [o.object_id for o in expand_graph(graph, seeds, hops=1)] == [a.id, b.id]


def test_expand_graph_inherits_best_parent_score():
    a = make_obj(content="strong seed", turn=0, embedding=axis(0))
    b = make_obj(content="weak seed", turn=1, embedding=axis(1))
    shared = make_obj(content="shared neighbor", turn=2, embedding=axis(2))
    graph = graph_of(a, b, shared)
    _reference(graph, a, shared)
    _reference(graph, b, shared)
    seeds = [
        ScoredObject(object_id=a.id, hybrid=1.0),
        ScoredObject(object_id=b.id, hybrid=0.5),
    ]
    out = expand_graph(graph, seeds, hops=1)
    assert out[-1].object_id == shared.id
    assert out[-1].hybrid == pytest.approx(1.0 * EXPANSION_DECAY)


def test_expand_graph_walks_reverse_and_causal_edges():
    early = make_obj(content="cause item", turn=0, embedding=axis(0))
    late = make_obj(content="effect item", turn=3, embedding=axis(1))
    graph = graph_of(early, late)
    graph.add_edge(CanvasEdge(src=early.id, dst=late.id, kind=EdgeKind.CAUSAL,
                              weight=1.0, origin=EdgeOrigin.TEMPORAL_HEURISTIC))
    # Seeding from the edge target still reaches the source.
    seeds = [ScoredObject(object_id=late.id, hybrid=0.9)]
    out = expand_graph(graph, seeds, hops=1)
    assert [o.object_id for o in out] == [late.id, early.id]


def test_expand_graph_deterministic_sibling_order():
    seed = make_obj(content="seed item", turn=0, embedding=axis(0))
    sib_a = make_obj(content="sibling one", turn=1, embedding=axis(1))
    sib_b = make_obj(content="sibling two", turn=2, embedding=axis(2))
    graph = graph_of(seed, sib_a, sib_b)
    _reference(graph, seed, sib_a)
    _reference(graph, seed, sib_b)
    out = expand_graph(graph, [ScoredObject(object_id=seed.id, hybrid=1.0)], hops=1)
    # Equal inherited scores; the id breaks the tie.
    expected = sorted([sib_a.id, sib_b.id])
    assert [o.object_id for o in out[1:]] == expected


class _ReversingReranker:
    def rerank(self, query_text, candidates):
        return [(cid, float(rank)) for rank, (cid, _) in enumerate(candidates)]


class _ExplodingReranker:
    def rerank(self, query_text, candidates):
        raise RuntimeError("reranker fell over")


class _ForgetfulReranker:
    def rerank(self, query_text, candidates):
        return [(candidates[0][0], 5.0)]


def _candidates(graph, scores):
    out = []
    for idx, score in enumerate(scores):
        obj = make_obj(content=f"candidate {idx}", turn=idx, embedding=axis(0))
        graph.add_object(obj)
        out.append(ScoredObject(object_id=obj.id, hybrid=score))
    return out


def test_rerank_without_backend_uses_hybrid_as_rerank():
    graph = CanvasGraph()
    cands = _candidates(graph, [0.2, 0.9, 0.5])
    ranked = rerank_candidates(graph, None, "q", cands, k=3)
    assert [r.hybrid for r in ranked] == [0.9, 0.5, 0.2]
    assert [r.rerank for r in ranked] == [0.9, 0.5, 0.2]


def test_rerank_truncates_to_k():
    graph = CanvasGraph()
    cands = _candidates(graph, [0.2, 0.9, 0.5, 0.7])
    ranked = rerank_candidates(graph, None, "q", cands, k=2)
    assert [r.hybrid for r in ranked] == [0.9, 0.7]


def test_rerank_backend_reorders():
    graph = CanvasGraph()
    cands = _candidates(graph, [0.9, 0.5, 0.2])
    ranked = rerank_candidates(graph, _ReversingReranker(), "q", cands, k=3)
    # The stub scores candidates by their position, so the order flips.
    assert [r.hybrid for r in ranked] == [0.2, 0.5, 0.9]
    assert [r.rerank for r in ranked] == [2.0, 1.0, 0.0]


def test_rerank_backend_failure_falls_back_to_hybrid():
    graph = CanvasGraph()
    cands = _candidates(graph, [0.2, 0.9])
    ranked = rerank_candidates(graph, _ExplodingReranker(), "q", cands, k=2)
    assert [r.hybrid for r in ranked] == [0.9, 0.2]
    assert [r.rerank for r in ranked] == [0.9, 0.2]


def test_rerank_missing_scores_sink_to_bottom():
    graph = CanvasGraph()
    cands = _candidates(graph, [0.9, 0.5, 0.2])
    ranked = rerank_candidates(graph, _ForgetfulReranker(), "q", cands, k=3)
    # Only the top hybrid candidate got a score; the rest keep hybrid order.
    assert ranked[0].rerank == 5.0
    assert [r.hybrid for r in ranked] == [0.9, 0.5, 0.2]


def test_rerank_requires_candidates():
    with pytest.raises(ValueError):
        rerank_candidates(CanvasGraph(), None, "q", [], k=5)


def test_render_object_line_format():
    obj = make_obj(kind=ObjectKind.DECISION, content="cache in redis",
                   quote="we will cache in Redis", turn=7)
    line = render_object_line(obj)
    assert line == '- [DECISION] (turn 7) "we will cache in Redis" :: cache in redis\n'


def test_greedy_select_skip_and_continue_frozen():
    graph = CanvasGraph()
    costs = {"alpha": 900, "beta": 800, "gamma": 500}

    def counter(text: str) -> int:
        for name, cost in costs.items():
            if name in text:
                return cost
        raise AssertionError(f"unexpected line {text!r}")

    cands = []
    for name in ("alpha", "beta", "gamma"):
        obj = make_obj(content=name, turn=0, embedding=axis(0))
        graph.add_object(obj)
        cands.append(ScoredObject(object_id=obj.id, hybrid=1.0))
    picked = greedy_select(graph, cands, budget_tokens=1500, token_counter=counter)
    # 900 fits, 800 does not (600 left), 500 does: skip is not a stop.
    assert [graph.objects[c.object_id].content for c in picked] == ["alpha", "gamma"]


def test_greedy_select_zero_budget_selects_nothing():
    graph = CanvasGraph()
    cands = _candidates(graph, [1.0, 0.9])
    assert greedy_select(graph, cands, budget_tokens=0) == []


def test_greedy_select_respects_exact_fit():
    graph = CanvasGraph()
    obj = make_obj(content="tight fit", turn=0, embedding=axis(0))
    graph.add_object(obj)
    line_cost = default_token_counter(render_object_line(obj))
    picked = greedy_select(graph, [ScoredObject(object_id=obj.id, hybrid=1.0)], line_cost)
    assert len(picked) == 1
    picked = greedy_select(graph, [ScoredObject(object_id=obj.id, hybrid=1.0)], line_cost - 1)
    assert picked == []


def test_build_injection_groups_by_kind_and_keeps_header():
    todo = make_obj(kind=ObjectKind.TODO, content="write the doc", turn=1, embedding=axis(0))
    decision = make_obj(kind=ObjectKind.DECISION, content="cache in redis", turn=2,
                        embedding=axis(1))
    insight = make_obj(kind=ObjectKind.INSIGHT, content="builds are slow", turn=3,
                       embedding=axis(2))
    graph = graph_of(todo, decision, insight)
    selected = [
        ScoredObject(object_id=todo.id, hybrid=0.9),
        ScoredObject(object_id=insight.id, hybrid=0.8),
        ScoredObject(object_id=decision.id, hybrid=0.7),
    ]
    block = build_injection(graph, selected, _plan())
    lines = block.splitlines()
    assert lines[0] == INJECTION_HEADER
    assert lines[1].startswith("- [DECISION]")
    assert lines[2].startswith("- [INSIGHT]")
    assert lines[3].startswith("- [TODO]")
    assert REASONING_INSTRUCTION not in block
    assert TEMPORAL_INSTRUCTION not in block


def test_build_injection_class_instructions():
    block_multi = build_injection(CanvasGraph(), [], _plan(klass=QueryClass.MULTI_HOP))
    assert block_multi.startswith(INJECTION_HEADER)
    assert REASONING_INSTRUCTION in block_multi
    block_temporal = build_injection(CanvasGraph(), [], _plan(klass=QueryClass.TEMPORAL))
    assert TEMPORAL_INSTRUCTION in block_temporal
    assert REASONING_INSTRUCTION not in block_temporal


def test_retrieve_detailed_end_to_end():
    embedder = MockEmbedder()
    graph = CanvasGraph()
    for idx, content in enumerate(
        ("the deploy freeze starts friday", "cache responses in redis", "the office plant needs water")
    ):
        graph.add_object(
            make_obj(content=content, turn=idx, embedding=embedder.embed(content))
        )
    result = retrieve_detailed(graph, "when does the deploy freeze start?", embedder)
    assert result.plan.klass is QueryClass.TEMPORAL
    assert result.ranked
    top = result.ranked[0]
    assert graph.objects[top.object_id].content == "the deploy freeze starts friday"
    assert result.injection.startswith(INJECTION_HEADER)
    assert "deploy freeze" in result.injection
    assert TEMPORAL_INSTRUCTION in result.injection
    payload = [render_object_line(graph.objects[c.object_id]) for c in result.selected]
    assert sum(default_token_counter(line) for line in payload) <= result.plan.budget_tokens


def test_retrieve_empty_graph_returns_bare_header():
    out = retrieve(CanvasGraph(), "anything on file?", MockEmbedder())
    assert out.startswith(INJECTION_HEADER)
    assert "- [" not in out


def test_retrieve_budget_zero_keeps_header_only():
    embedder = MockEmbedder()
    graph = CanvasGraph()
    graph.add_object(make_obj(content="cache responses in redis", turn=0,
                              embedding=embedder.embed("cache responses in redis")))
    config = RetrievalConfig(budget_tokens=0)
    out = retrieve(graph, "what about the cache?", embedder, config)
    assert out.startswith(INJECTION_HEADER)
    assert "- [" not in out
