"""N-ary fact storage with role-typed posting lists.

A :class:`Hypergraph` holds entities, facts (hyperedges) and source chunks.
Once built it is sealed: posting lists, entity incidence and the density
statistic are computed eagerly and never change. Two query paths are
provided for role-bound lookups: :meth:`Hypergraph.answer_native` reads
unbound arguments directly from the fact record, while
:func:`answer_binary` runs the same query over an event-reified view and
counts every role edge it has to chase.
"""

from __future__ import annotations

import itertools
import json
import logging
from collections import defaultdict
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

from .exceptions import DanglingReferenceError, DataError, IngestError, UnknownEntityError
from .postings import intersect

logger = logging.getLogger(__name__)

WILDCARD = None
SNAPSHOT_FORMAT = "hyperrag-graph"
SNAPSHOT_VERSION = 1

Arg = tuple  # (role or None, entity id)


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    description: str | None = None
    chunk_ids: tuple[str, ...] = ()

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "description": self.description,
            "chunk_ids": list(self.chunk_ids),
        }


@dataclass(frozen=True)
class NaryFact:
    id: str
    description: str
    args: tuple[Arg, ...]
    chunk_ids: tuple[str, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    @property
    def entities(self) -> tuple[str, ...]:
        """Distinct participating entity ids, in argument order."""
        return tuple(dict.fromkeys(e for _, e in self.args))

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "description": self.description,
            "args": [{"role": r, "entity": e} for r, e in self.args],
            "chunk_ids": list(self.chunk_ids),
        }


@dataclass(frozen=True)
class RoleBoundQuery:
    """k role-typed bindings; a ``None`` role is the wildcard."""

    bindings: tuple[Arg, ...]

    def __post_init__(self):
        bindings = tuple((r, e) for r, e in self.bindings)
        object.__setattr__(self, "bindings", bindings)
        if not bindings:
            raise ValueError("query needs at least one binding")
        if len(set(bindings)) != len(bindings):
            raise ValueError("duplicate binding in query")
        wild = {e for r, e in bindings if r is WILDCARD}
        typed = {e for r, e in bindings if r is not WILDCARD}
        if wild & typed:
            raise ValueError(
                "an entity may not be bound both by wildcard and by role: "
                f"{sorted(wild & typed)}"
            )

    @classmethod
    def of(cls, *bindings) -> RoleBoundQuery:
        return cls(tuple(bindings))

    @property
    def k(self) -> int:
        return len(self.bindings)


@dataclass
class RetrievalCost:
    postings_scanned: int = 0
    records_read: int = 0
    role_chases: int = 0


@dataclass(frozen=True)
class Match:
    fact_id: str
    unbound: tuple[Arg, ...]


def _assign_bindings(args: tuple[Arg, ...], bindings: tuple[Arg, ...]) -> list[int] | None:
    """Map each binding to a distinct argument slot, typed bindings first.

    Returns the bound slot indices, or None if the fact does not satisfy the
    query.
    """
    used: set[int] = set()
    order = sorted(range(len(bindings)), key=lambda i: bindings[i][0] is WILDCARD)
    for bi in order:
        role, ent = bindings[bi]
        for slot, (r, e) in enumerate(args):
            if slot in used or e != ent:
                continue
            if role is WILDCARD or role == r:
                used.add(slot)
                break
        else:
            return None
    return sorted(used)


def mean_degree_density(facts: Mapping[str, NaryFact], entities: Mapping[str, Entity]) -> float:
    """Sum of fact arities over the number of entities."""
    if not entities:
        return 0.0
    return sum(f.arity for f in facts.values()) / len(entities)


class Hypergraph:
    """Sealed store of entities, n-ary facts and chunks.

    Build with :meth:`build`, :func:`ingest` or :meth:`load`; the mappings
    exposed afterwards are read-only.
    """

    def __init__(
        self,
        entities: Mapping[str, Entity],
        facts: Mapping[str, NaryFact],
        chunks: Mapping[str, str],
        *,
        density_fn: Callable[[Mapping, Mapping], float] = mean_degree_density,
    ):
        self.entities = MappingProxyType(dict(sorted(entities.items())))
        self.facts = MappingProxyType(dict(sorted(facts.items())))
        self.chunks = MappingProxyType(dict(sorted(chunks.items())))
        self._validate()

        postings: dict[Arg, list[str]] = defaultdict(list)
        incidence: dict[str, list[str]] = {e: [] for e in self.entities}
        for fid, fact in self.facts.items():  # sorted by fid
            for role, ent in fact.args:
                postings[(role, ent)].append(fid)
            for ent in fact.entities:
                incidence[ent].append(fid)
        self.postings = MappingProxyType({k: tuple(v) for k, v in postings.items()})
        self.entity_incidence = MappingProxyType({k: tuple(v) for k, v in incidence.items()})
        self.density = float(density_fn(self.facts, self.entities))
        self._by_name: dict[str, list[str]] = defaultdict(list)
        self._by_lower: dict[str, list[str]] = defaultdict(list)
        for eid, ent in self.entities.items():
            self._by_name[ent.name].append(eid)
            self._by_lower[ent.name.casefold()].append(eid)

    @classmethod
    def build(cls, entities: Iterable[Entity], facts: Iterable[NaryFact], chunks=(), **kw) -> Hypergraph:
        chunk_map = dict(chunks.items()) if isinstance(chunks, Mapping) else dict(chunks)
        return cls({e.id: e for e in entities}, {f.id: f for f in facts}, chunk_map, **kw)

    def _validate(self):
        if not self.facts:
            raise IngestError("no facts")
        for ent in self.entities.values():
            if not ent.name:
                raise IngestError(f"entity {ent.id!r} has empty name")
            for cid in ent.chunk_ids:
                if cid not in self.chunks:
                    raise DanglingReferenceError("chunk", cid, owner=ent.id)
        for fact in self.facts.values():
            _check_fact(fact)
            for _, ent in fact.args:
                if ent not in self.entities:
                    raise DanglingReferenceError("entity", ent, owner=fact.id)
            for cid in fact.chunk_ids:
                if cid not in self.chunks:
                    raise DanglingReferenceError("chunk", cid, owner=fact.id)

    def __repr__(self):
        return (
            f"Hypergraph(entities={len(self.entities)}, facts={len(self.facts)}, "
            f"chunks={len(self.chunks)}, density={self.density:.3f})"
        )

    # -- lookups ---------------------------------------------------------

    def degree(self, entity_id: str) -> int:
        return len(self.entity_incidence.get(entity_id, ()))

    def incident_facts(self, entity_id: str) -> list[str]:
        try:
            return list(self.entity_incidence[entity_id])
        except KeyError:
            raise UnknownEntityError(entity_id) from None

    def posting(self, role, entity_id: str) -> tuple[str, ...]:
        if role is WILDCARD:
            return self.entity_incidence.get(entity_id, ())
        return self.postings.get((role, entity_id), ())

    def resolve_name(self, surface: str) -> list[str]:
        """Entity ids whose name matches exactly, else case-insensitively."""
        hits = self._by_name.get(surface)
        if hits:
            return list(hits)
        return list(self._by_lower.get(surface.casefold(), ()))

    def entity_text(self, entity_id: str) -> str:
        return self.entities[entity_id].name

    def answer_native(self, query: RoleBoundQuery) -> tuple[list[Match], RetrievalCost]:
        """Intersect the k posting lists and read unbound args from each record."""
        lists = [self.posting(r, e) for r, e in query.bindings]
        cost = RetrievalCost(postings_scanned=sum(len(p) for p in lists))
        matches = []
        for fid in intersect(lists):
            fact = self.facts[fid]
            cost.records_read += 1
            bound = _assign_bindings(fact.args, query.bindings)
            if bound is None:
                continue
            unbound = tuple(a for i, a in enumerate(fact.args) if i not in bound)
            matches.append(Match(fid, unbound))
        return matches, cost

    # -- persistence ------------------------------------------------------

    def to_snapshot(self) -> str:
        doc = {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "entities": [e.to_record() for e in self.entities.values()],
            "facts": [f.to_record() for f in self.facts.values()],
            "chunks": [{"id": k, "text": v} for k, v in self.chunks.items()],
        }
        return json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=1) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_snapshot(), encoding="utf-8")

    @classmethod
    def from_snapshot(cls, text: str, **kw) -> Hypergraph:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"snapshot is not valid JSON at byte {exc.pos}: {exc.msg}") from exc
        if doc.get("format") != SNAPSHOT_FORMAT:
            raise DataError(f"not a {SNAPSHOT_FORMAT} snapshot")
        if doc.get("version") != SNAPSHOT_VERSION:
            raise DataError(f"unsupported snapshot version {doc.get('version')!r}")
        entities = [_entity_from_record(r) for r in doc["entities"]]
        facts = [_fact_from_record(r) for r in doc["facts"]]
        chunks = {r["id"]: r["text"] for r in doc["chunks"]}
        return cls.build(entities, facts, chunks, **kw)

    @classmethod
    def load(cls, path, **kw) -> Hypergraph:
        return cls.from_snapshot(Path(path).read_text(encoding="utf-8"), **kw)

    def to_binary_graph(self) -> Hypergraph:
        """Event-reified copy: each fact becomes an entity plus arity-2 role facts.

        Used for the binary-KG ablation, where retrievers run unchanged over
        the reified structure.
        """
        entities = dict(self.entities)
        facts = {}
        for fid, fact in self.facts.items():
            ev = event_id(fid)
            entities[ev] = Entity(ev, fact.description, None, fact.chunk_ids)
            for j, (role, ent) in enumerate(fact.args):
                label = role or "arg"
                edge_id = f"{fid}#{j}"
                facts[edge_id] = NaryFact(
                    edge_id,
                    f"{label} of: {fact.description}",
                    (("event", ev), (role, ent)),
                    fact.chunk_ids,
                )
        return Hypergraph(entities, facts, self.chunks)


def _check_fact(fact: NaryFact):
    if not fact.description:
        raise IngestError(f"fact {fact.id!r} has empty description")
    if len(fact.args) < 2:
        raise IngestError(f"fact {fact.id!r} has arity {len(fact.args)} < 2")
    if len(set(fact.args)) != len(fact.args):
        raise IngestError(f"fact {fact.id!r} repeats a (role, entity) pair")


def _entity_from_record(rec: dict) -> Entity:
    return Entity(
        id=str(rec["id"]),
        name=str(rec["name"]),
        description=rec.get("description"),
        chunk_ids=tuple(rec.get("chunk_ids") or ()),
    )


def _fact_from_record(rec: dict) -> NaryFact:
    args = tuple((a.get("role"), str(a["entity"])) for a in rec["args"])
    return NaryFact(
        id=str(rec["id"]),
        description=str(rec["description"]),
        args=args,
        chunk_ids=tuple(rec.get("chunk_ids") or ()),
    )


def _read_jsonl(lines: Iterable[str], parse, source: str):
    out = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise TypeError("record is not an object")
            item = parse(rec)
        except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
            raise IngestError(f"malformed record: {exc}", line=lineno, source=source) from exc
        if not item.id:
            raise IngestError("empty id", line=lineno, source=source)
        out.append((lineno, item))
    return out


@dataclass(frozen=True)
class _Chunk:
    id: str
    text: str


def _as_lines(stream):
    if isinstance(stream, (str, Path)):
        return Path(stream).read_text(encoding="utf-8").splitlines()
    return stream


def ingest(facts_stream, entities_stream, chunks_stream=(), **kw) -> Hypergraph:
    """Parse JSONL facts, entities and chunks into a sealed graph.

    Each stream may be a path or an iterable of lines. Errors carry the
    offending line number.
    """
    chunks = _read_jsonl(_as_lines(chunks_stream), lambda r: _Chunk(str(r["id"]), str(r["text"])), "chunks")
    entities = _read_jsonl(_as_lines(entities_stream), _entity_from_record, "entities")
    facts = _read_jsonl(_as_lines(facts_stream), _fact_from_record, "facts")
    if not facts:
        raise IngestError("no facts")

    chunk_map = {}
    for lineno, c in chunks:
        if c.id in chunk_map:
            raise IngestError(f"duplicate chunk id {c.id!r}", line=lineno, source="chunks")
        chunk_map[c.id] = c.text
    ent_map = {}
    for lineno, e in entities:
        if e.id in ent_map:
            raise IngestError(f"duplicate entity id {e.id!r}", line=lineno, source="entities")
        if not e.name:
            raise IngestError(f"entity {e.id!r} has empty name", line=lineno, source="entities")
        for cid in e.chunk_ids:
            if cid not in chunk_map:
                raise DanglingReferenceError("chunk", cid, owner=e.id, line=lineno, source="entities")
        ent_map[e.id] = e
    fact_map = {}
    for lineno, f in facts:
        if f.id in fact_map:
            raise IngestError(f"duplicate fact id {f.id!r}", line=lineno, source="facts")
        try:
            _check_fact(f)
        except IngestError as exc:
            raise IngestError(str(exc), line=lineno, source="facts") from None
        for _, ent in f.args:
            if ent not in ent_map:
                raise DanglingReferenceError("entity", ent, owner=f.id, line=lineno, source="facts")
        for cid in f.chunk_ids:
            if cid not in chunk_map:
                raise DanglingReferenceError("chunk", cid, owner=f.id, line=lineno, source="facts")
        fact_map[f.id] = f
    g = Hypergraph(ent_map, fact_map, chunk_map, **kw)
    logger.info("ingested %r", g)
    return g


# -- event-reified binary view -------------------------------------------


def event_id(fact_id: str) -> str:
    return f"event:{fact_id}"


@dataclass(frozen=True)
class RoleEdge:
    event: str
    role: str | None
    entity: str


@dataclass
class BinaryView:
    """Event nodes with role-typed binary edges and event posting lists."""

    events: dict[str, tuple[int, ...]]  # event id -> edge ids
    edges: list[RoleEdge]
    event_postings: dict[Arg, tuple[str, ...]]
    event_incidence: dict[str, tuple[str, ...]]
    fact_of: dict[str, str] = field(default_factory=dict)

    @property
    def n_events(self) -> int:
        return len(self.events)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def posting(self, role, entity_id: str) -> tuple[str, ...]:
        if role is WILDCARD:
            return self.event_incidence.get(entity_id, ())
        return self.event_postings.get((role, entity_id), ())


def reify_binary(g: Hypergraph) -> BinaryView:
    events: dict[str, tuple[int, ...]] = {}
    edges: list[RoleEdge] = []
    postings: dict[Arg, list[str]] = defaultdict(list)
    incidence: dict[str, list[str]] = defaultdict(list)
    fact_of = {}
    # event ids share the fact-id order, so posting lists stay sorted
    for fid, fact in g.facts.items():
        ev = event_id(fid)
        fact_of[ev] = fid
        ids = []
        for role, ent in fact.args:
            ids.append(len(edges))
            edges.append(RoleEdge(ev, role, ent))
            postings[(role, ent)].append(ev)
            if not incidence[ent] or incidence[ent][-1] != ev:
                incidence[ent].append(ev)
        events[ev] = tuple(ids)
    return BinaryView(
        events,
        edges,
        {k: tuple(v) for k, v in postings.items()},
        {k: tuple(v) for k, v in incidence.items()},
        fact_of,
    )


def answer_binary(view: BinaryView, query: RoleBoundQuery) -> tuple[list[Match], RetrievalCost]:
    """Answer a role-bound query over the reified view.

    Each surviving event has its bound edges identified and every remaining
    role edge followed individually; each follow is one role chase.
    """
    lists = [view.posting(r, e) for r, e in query.bindings]
    cost = RetrievalCost(postings_scanned=sum(len(p) for p in lists))
    matches = []
    for ev in intersect(lists):
        edge_ids = view.events[ev]
        stubs = tuple((view.edges[i].role, view.edges[i].entity) for i in edge_ids)
        bound = _assign_bindings(stubs, query.bindings)
        if bound is None:
            continue
        unbound = []
        for slot, eid in enumerate(edge_ids):
            if slot in bound:
                continue
            edge = view.edges[eid]
            cost.role_chases += 1
            unbound.append((edge.role, edge.entity))
        matches.append(Match(view.fact_of[ev], tuple(unbound)))
    return matches, cost


# -- naive pairwise projection ----------------------------------------------


def _relation(fact: NaryFact) -> str:
    return fact.description


def naive_pairwise_projection(
    facts: Iterable[NaryFact], relation_of: Callable[[NaryFact], str] = _relation
) -> frozenset[tuple[str, str, str]]:
    """Project role-typed facts onto binary edges anchored at the first argument.

    ``give(giver=Alice, recipient=Bob, item=Book)`` yields
    ``(give/giver->recipient, Alice, Bob)`` and ``(give/giver->item, Alice, Book)``.
    The joint tuple is discarded.
    """
    out = set()
    for fact in facts:
        (anchor_role, anchor), *rest = fact.args
        rel = relation_of(fact)
        for role, ent in rest:
            out.add((f"{rel}/{anchor_role}->{role}", anchor, ent))
    return frozenset(out)


def fact_signature(fact: NaryFact, relation_of=_relation) -> tuple:
    """Id-free form of a fact: relation, anchor, then remaining args by role."""
    anchor, *rest = fact.args
    rest = sorted(rest, key=lambda a: (str(a[0]), a[1]))
    return (relation_of(fact), (anchor, *rest))


def reconstruct_from_projection(projection: Iterable[tuple[str, str, str]], max_candidates: int = 16):
    """Enumerate every fact set whose naive projection equals ``projection``.

    Returns a list of frozensets of fact signatures ``(relation, args)``.
    """
    projection = frozenset(projection)
    groups: dict[tuple[str, str, str], dict[str, set[str]]] = defaultdict(lambda: defaultdict(set))
    for label, head, tail in projection:
        rel_anchor, other_role = label.split("->", 1)
        rel, anchor_role = rel_anchor.rsplit("/", 1)
        groups[(rel, anchor_role, head)][other_role].add(tail)

    def role(x):
        return None if x == "None" else x

    candidates = []
    for (rel, anchor_role, head), by_role in sorted(groups.items()):
        roles = sorted(by_role)
        for combo in itertools.product(*(sorted(by_role[r]) for r in roles)):
            args = ((role(anchor_role), head),) + tuple((role(r), e) for r, e in zip(roles, combo))
            candidates.append((rel, args))
    if len(candidates) > max_candidates:
        raise ValueError(f"{len(candidates)} candidate facts exceed enumeration cap {max_candidates}")

    consistent = []
    for size in range(1, len(candidates) + 1):
        for subset in itertools.combinations(candidates, size):
            facts = [NaryFact(f"c{i}", rel, args) for i, (rel, args) in enumerate(subset)]
            if naive_pairwise_projection(facts) == projection:
                consistent.append(frozenset(subset))
    return consistent
