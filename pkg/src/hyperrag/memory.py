"""HyperMemory: gateway-scored beam search over hyperedges."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from sklearn.base import BaseEstimator

from .chains import PseudoTriple, Question, extract_topic_entities
from .exceptions import BackendError
from .retriever import ScoredChain
from .store import Hypergraph

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BeamConfig:
    width: int = 3
    depth: int = 3

    def __post_init__(self):
        if self.width < 1 or self.depth < 1:
            raise ValueError("beam width and depth must be >= 1")


@dataclass(frozen=True)
class BeamPath:
    root: str
    steps: tuple[PseudoTriple, ...] = ()
    score: float = 1.0
    visited: frozenset = field(default_factory=frozenset)

    @property
    def frontier(self) -> str:
        return self.steps[-1].tail if self.steps else self.root

    def extend(self, triple: PseudoTriple, score: float) -> BeamPath:
        return BeamPath(self.root, self.steps + (triple,), score, self.visited | {triple.tail})


@dataclass
class BeamResult:
    paths: list[BeamPath]
    retained: list[ScoredChain]
    terminated_early: bool
    depth_reached: int
    trace: list[dict] = field(default_factory=list)
    error: str | None = None


def composite_score(edge_score: float, entity_score: float) -> float:
    return edge_score * entity_score


def render_triple(g: Hypergraph, t: PseudoTriple) -> str:
    return f"{g.entities[t.head].name} | {g.facts[t.fact].description} | {g.entities[t.tail].name}"


def render_context(g: Hypergraph, chains) -> str:
    return "\n".join(render_triple(g, c.triple) for c in chains)


def beam_retrieve(q: Question, seeds, g: Hypergraph, gateway, cfg: BeamConfig = BeamConfig()) -> BeamResult:
    """Expand the top-w paths depth by depth until the gateway deems the evidence sufficient.

    Gateway failures stop the search; the partial trace and retained
    triples are kept and the error message recorded on the result.
    """
    edge_cache: dict[tuple[str, str], float] = {}
    ent_cache: dict[tuple[str, str], float] = {}
    trace: list[dict] = []
    retained: list[ScoredChain] = []
    beams = [BeamPath(s, visited=frozenset({s})) for s in sorted(set(seeds))]
    depth_reached = 0

    def edge_score(head, fid):
        if (head, fid) not in edge_cache:
            s = gateway.score_edge(g.entities[head], g.facts[fid], q)
            edge_cache[(head, fid)] = s
            trace.append({"depth": depth, "kind": "edge", "input": {"entity": head, "fact": fid}, "score": s})
        return edge_cache[(head, fid)]

    def entity_score(fid, tail):
        if (fid, tail) not in ent_cache:
            s = gateway.score_entity(g.facts[fid], g.entities[tail], q)
            ent_cache[(fid, tail)] = s
            trace.append({"depth": depth, "kind": "entity", "input": {"fact": fid, "entity": tail}, "score": s})
        return ent_cache[(fid, tail)]

    try:
        for depth in range(1, cfg.depth + 1):
            candidates = []
            for beam in beams:
                head = beam.frontier
                facts = g.incident_facts(head)
                scored = sorted(((edge_score(head, f), f) for f in facts), key=lambda x: (-x[0], x[1]))
                for s_f, fid in scored[: cfg.width]:
                    for tail in sorted(g.facts[fid].entities):
                        if tail in beam.visited:
                            continue
                        s = composite_score(s_f, entity_score(fid, tail))
                        candidates.append((s, PseudoTriple(head, fid, tail), beam))
            if not candidates:
                break
            candidates.sort(key=lambda c: (-c[0], c[1].fact, c[1].tail, c[1].head, c[2].steps))
            top = candidates[: cfg.width]
            beams = [beam.extend(t, s) for s, t, beam in top]
            seen = {c.triple for c in retained}
            for s, t, _ in top:
                if t not in seen:
                    seen.add(t)
                    retained.append(ScoredChain(t, s, depth, 0.0))
            depth_reached = depth
            verdict, reason = gateway.sufficiency(render_context(g, retained), q, depth)
            trace.append({"depth": depth, "kind": "sufficiency", "input": len(retained), "verdict": verdict, "reason": reason})
            if verdict == "yes":
                return BeamResult(beams, retained, True, depth, trace)
    except BackendError as exc:
        logger.warning("question %s: beam search aborted at depth %d: %s", q.id, depth, exc)
        return BeamResult(beams, retained, False, depth_reached, trace, error=str(exc))
    return BeamResult(beams, retained, False, depth_reached, trace)


class HyperMemory(BaseEstimator):
    """Beam retriever driven by an LLM gateway; no training step."""

    def __init__(self, gateway=None, width=3, depth=3):
        self.gateway = gateway
        self.width = width
        self.depth = depth

    def fit(self, questions=None, y=None, **kw):
        return self

    def retrieve(self, question: Question, graph: Hypergraph, seeds=None) -> BeamResult:
        if seeds is None:
            seeds = extract_topic_entities(question, graph, self.gateway)
        return beam_retrieve(question, seeds, graph, self.gateway, BeamConfig(self.width, self.depth))
