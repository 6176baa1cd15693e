"""Question grounding, pseudo-binary triple derivation and path supervision."""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .exceptions import DataError, GroundingError
from .store import Hypergraph

logger = logging.getLogger(__name__)

DEFAULT_HOP_CAP = 4


class PseudoTriple(NamedTuple):
    head: str
    fact: str
    tail: str

    def sort_key(self):
        return (self.fact, self.head, self.tail)

    def to_record(self) -> dict:
        return {"head": self.head, "fact": self.fact, "tail": self.tail}


@dataclass
class Question:
    id: str
    text: str
    gold_answers: list[str] = field(default_factory=list)
    topic_entities: list[str] | None = None
    candidates: list[str] | None = None

    def __post_init__(self):
        if not self.text:
            raise DataError(f"question {self.id!r} has empty text")

    @classmethod
    def from_record(cls, rec: dict) -> Question:
        return cls(
            id=str(rec["id"]),
            text=rec["question"],
            gold_answers=list(rec.get("answers") or []),
            topic_entities=rec.get("topic_entities"),
            candidates=rec.get("candidates"),
        )

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "question": self.text,
            "answers": list(self.gold_answers),
            "topic_entities": self.topic_entities,
            "candidates": self.candidates,
        }


def load_questions(path) -> list[Question]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(Question.from_record(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"{path}:{lineno}: malformed question record: {exc}") from exc
    return out


def resolve_surface_forms(g: Hypergraph, surfaces: Iterable[str]) -> list[str]:
    """Exact name match, then case-insensitive; unresolved mentions are dropped."""
    resolved: list[str] = []
    for s in surfaces:
        hits = g.resolve_name(s)
        if not hits:
            logger.warning("topic mention %r does not resolve to any entity", s)
            continue
        for h in hits:
            if h not in resolved:
                resolved.append(h)
    return resolved


def extract_topic_entities(q: Question, g: Hypergraph, gateway=None) -> list[str]:
    """Ground a question onto graph entity ids.

    A ``topic_entities`` field on the question wins and the gateway is not
    consulted.
    """
    if q.topic_entities:
        return list(q.topic_entities)
    if gateway is None:
        raise GroundingError(f"question {q.id!r} has no topic entities and no gateway is configured")
    resolved = resolve_surface_forms(g, gateway.topic_entities(q))
    if not resolved:
        raise GroundingError(f"no grounding for question {q.id!r}")
    return resolved


def triples_from(g: Hypergraph, head: str) -> list[PseudoTriple]:
    """All triples leaving ``head`` through its incident facts, sorted by (fact, tail)."""
    out = []
    for fid in g.incident_facts(head):
        for tail in g.facts[fid].entities:
            if tail != head:
                out.append(PseudoTriple(head, fid, tail))
    out.sort(key=lambda t: (t.fact, t.tail))
    return out


def derive_triples(g: Hypergraph, seeds: Iterable[str]) -> set[PseudoTriple]:
    """Every ordered entity pair of every fact incident to a seed."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("derive_triples needs at least one seed")
    facts = set()
    for s in seeds:
        facts.update(g.incident_facts(s))
    out = set()
    for fid in facts:
        members = g.facts[fid].entities
        for h in members:
            for t in members:
                if h != t:
                    out.add(PseudoTriple(h, fid, t))
    return out


@dataclass
class SupervisionSet:
    question_id: str
    positives: list[tuple[int, PseudoTriple]]
    negatives: list[tuple[int, PseudoTriple]]

    @property
    def path(self) -> list[PseudoTriple]:
        return [t for _, t in self.positives]


def shortest_path(
    g: Hypergraph, seeds: Iterable[str], answers: Iterable[str], hop_cap: int = DEFAULT_HOP_CAP
) -> list[PseudoTriple] | None:
    """Multi-source, multi-target BFS over pseudo-triples.

    Among equal-length paths the lexicographically smallest sequence of
    (fact, tail) steps wins, then the smallest seed.
    """
    targets = set(answers)
    seeds = sorted(set(seeds))
    hit = [s for s in seeds if s in targets]
    if hit:
        return []
    # frontier entries: (step key, seed, entity, path); kept sorted by (key, seed)
    frontier = [((), s, s, []) for s in seeds]
    seen = set(seeds)
    for _ in range(hop_cap):
        nxt = []
        found = []
        for key, seed, ent, path in frontier:
            for t in triples_from(g, ent):
                if t.tail in seen:
                    continue
                seen.add(t.tail)
                entry = (key + ((t.fact, t.tail),), seed, t.tail, path + [t])
                nxt.append(entry)
                if t.tail in targets:
                    found.append(entry)
        if found:
            return min(found, key=lambda e: (e[0], e[1]))[3]
        if not nxt:
            return None
        nxt.sort(key=lambda e: (e[0], e[1]))
        frontier = nxt
    return None


def build_supervision(
    g: Hypergraph,
    q: Question,
    seeds: Iterable[str],
    answers: Iterable[str],
    hop_cap: int = DEFAULT_HOP_CAP,
) -> SupervisionSet | None:
    """Positives along a shortest seed-to-answer path, negatives beside it.

    Negatives at hop i are the other triples leaving the hop-i head. Returns
    None (and logs) when no answer is reachable within ``hop_cap``.
    """
    path = shortest_path(g, seeds, answers, hop_cap)
    if not path:
        logger.warning("question %s: no answer reachable within %d hops; skipped", q.id, hop_cap)
        return None
    on_path = set(path)
    positives = [(i, t) for i, t in enumerate(path, 1)]
    negatives = []
    for i, pos in positives:
        for t in triples_from(g, pos.head):
            if t not in on_path:
                negatives.append((i, t))
    return SupervisionSet(q.id, positives, negatives)
