import json
from collections import deque

import numpy as np
import pytest

from hyperrag.chains import (
    PseudoTriple,
    Question,
    build_supervision,
    derive_triples,
    extract_topic_entities,
    load_questions,
    shortest_path,
    triples_from,
)
from hyperrag.exceptions import DataError, GroundingError
from hyperrag.llm import LlmGateway, ScriptedBackend
from hyperrag.store import Entity, Hypergraph, NaryFact
from hyperrag.synthetic import random_role_graph


def _g(facts, names=None):
    ids = sorted({e for f in facts.values() for e in f})
    names = names or {}
    ents = [Entity(i, names.get(i, f"name {i}")) for i in ids]
    return Hypergraph.build(ents, [NaryFact(k, k, tuple((None, e) for e in v)) for k, v in facts.items()])


def test_arity_three_fact_gives_six_triples():
    g = _g({"f": ["A", "B", "C"]})
    assert derive_triples(g, ["A"]) == {PseudoTriple(h, "f", t) for h in "ABC" for t in "ABC" if h != t}
    assert len(derive_triples(_g({"f": ["A", "B"]}), ["A"])) == 2


def test_shared_fact_emitted_once():
    g = _g({"f": ["A", "B", "C"], "g": ["C", "D"]})
    assert derive_triples(g, ["A", "B"]) == derive_triples(g, ["A"])


def test_triples_from_sorted_by_fact_then_tail():
    g = _g({"f2": ["A", "C", "B"], "f1": ["A", "D"]})
    assert triples_from(g, "A") == [("A", "f1", "D"), ("A", "f2", "B"), ("A", "f2", "C")]


def test_two_hop_supervision():
    g = _g({"f1": ["A", "B"], "f2": ["B", "C"]})
    q = Question("q", "text", ["C"], ["A"])
    sup = build_supervision(g, q, ["A"], ["C"])
    assert sup.positives == [(1, ("A", "f1", "B")), (2, ("B", "f2", "C"))]
    assert sup.negatives == [(2, ("B", "f1", "A"))]


def test_negatives_are_incident_minus_path():
    g = _g({"f1": ["A", "B", "X"], "f2": ["A", "Y"], "f3": ["A", "Z", "W"]})
    sup = build_supervision(g, Question("q", "t", ["B"], ["A"]), ["A"], ["B"])
    assert sup.path == [("A", "f1", "B")]
    assert len(sup.negatives) == 4
    assert not {t for _, t in sup.negatives} & set(sup.path)


def test_direct_neighbour_and_unreachable():
    g = _g({"f1": ["A", "B"], "f2": ["C", "D"]})
    assert shortest_path(g, ["A"], ["B"]) == [("A", "f1", "B")]
    assert build_supervision(g, Question("q", "t"), ["A"], ["D"]) is None


def _bfs_len(g, seeds, answers):
    dist = {s: 0 for s in seeds}
    queue = deque(seeds)
    while queue:
        u = queue.popleft()
        for t in triples_from(g, u):
            if t.tail not in dist:
                dist[t.tail] = dist[u] + 1
                queue.append(t.tail)
    found = [dist[a] for a in answers if a in dist]
    return min(found) if found else None


@pytest.mark.parametrize("seed", range(20))
def test_shortest_path_length_matches_bfs(seed):
    rng = np.random.default_rng(seed)
    g = random_role_graph(rng, n_entities=30, n_facts=25, arity=(2, 3))
    ents = sorted(g.entities)
    seeds, answers = [ents[0]], [ents[int(rng.integers(1, len(ents)))]]
    path = shortest_path(g, seeds, answers, hop_cap=30)
    want = _bfs_len(g, seeds, answers)
    assert (None if path is None else len(path)) == want
    if path:
        assert path[0].head in seeds and path[-1].tail in answers
        assert all(a.tail == b.head for a, b in zip(path, path[1:]))


def test_topic_entities_override_skips_gateway():
    g = _g({"f": ["A", "B"]})
    backend = ScriptedBackend({"topic": {"*": ["name B"]}})
    assert extract_topic_entities(Question("q", "t", [], ["A"]), g, LlmGateway(backend)) == ["A"]
    assert backend.calls == 0


def test_gateway_grounding_is_case_insensitive():
    g = _g({"f": ["bsg", "x"]}, names={"bsg": "Bruce Seth Green"})
    gw = LlmGateway(ScriptedBackend({"topic": {"Q1": ["bruce seth green"]}}))
    assert extract_topic_entities(Question("Q1", "Who is he?"), g, gw) == ["bsg"]
    with pytest.raises(GroundingError):
        extract_topic_entities(Question("Q2", "t"), g, None)


def test_load_questions(tmp_path):
    p = tmp_path / "qa.jsonl"
    p.write_text(json.dumps({"id": "1", "question": "Who?", "answers": ["A"]}) + "\n\n")
    assert load_questions(p)[0].gold_answers == ["A"]
    p.write_text('{"id": "1"}\n')
    with pytest.raises(DataError, match=":1:"):
        load_questions(p)
