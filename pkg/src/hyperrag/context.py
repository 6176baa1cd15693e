"""Token-budgeted packing of retrieved evidence for generation."""

from __future__ import annotations

from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

from .store import Hypergraph

SECTIONS = ("hyperedges", "entities", "chunks")
DEFAULT_TOTAL_TOKENS = 4000


def count_tokens(text: str) -> int:
    """Whitespace-delimited word count."""
    return len(text.split())


@dataclass(frozen=True)
class BudgetConfig:
    total_tokens: int = DEFAULT_TOTAL_TOKENS
    hyperedge_share: float = 0.5
    entity_share: float = 0.3
    chunk_share: float = 0.2

    def __post_init__(self):
        if self.total_tokens < 1:
            raise ValueError("total_tokens must be >= 1")
        shares = (self.hyperedge_share, self.entity_share, self.chunk_share)
        if min(shares) < 0 or abs(sum(shares) - 1.0) > 1e-9:
            raise ValueError("budget shares must be non-negative and sum to 1")

    def allocations(self) -> tuple[int, int, int]:
        """Per-section budgets before spillover; rounding slack goes to chunks."""
        h = int(self.total_tokens * self.hyperedge_share + 1e-9)
        e = int(self.total_tokens * self.entity_share + 1e-9)
        return h, e, self.total_tokens - h - e


@dataclass(frozen=True)
class Block:
    source_id: str
    text: str
    priority: float
    tokens: int


@dataclass
class Section:
    name: str
    allocated: int
    spillover: int = 0
    blocks: list[Block] = field(default_factory=list)

    @property
    def budget(self) -> int:
        return self.allocated + self.spillover

    @property
    def used(self) -> int:
        return sum(b.tokens for b in self.blocks)


@dataclass
class ContextBundle:
    sections: list[Section]
    total_tokens: int

    def section(self, name: str) -> Section:
        return next(s for s in self.sections if s.name == name)

    @property
    def used(self) -> int:
        return sum(s.used for s in self.sections)

    @property
    def text(self) -> str:
        parts = []
        for s in self.sections:
            if s.blocks:
                parts.append("\n".join(b.text for b in s.blocks))
        return "\n\n".join(parts)

    def to_record(self) -> dict:
        return {
            "total_tokens": self.total_tokens,
            "used": self.used,
            "sections": [
                {
                    "name": s.name,
                    "allocated": s.allocated,
                    "spillover": s.spillover,
                    "used": s.used,
                    "blocks": [{"id": b.source_id, "priority": b.priority, "tokens": b.tokens, "text": b.text} for b in s.blocks],
                }
                for s in self.sections
            ],
        }


def render_fact(g: Hypergraph, fid: str) -> str:
    fact = g.facts[fid]
    args = ", ".join(f"{r}={g.entities[e].name}" if r else g.entities[e].name for r, e in fact.args)
    return f"FACT {fid}: {fact.description} | entities: {args}"


def render_entity(g: Hypergraph, eid: str) -> str:
    ent = g.entities[eid]
    return f"ENTITY {ent.name}: {ent.description or ''}".rstrip()


def render_chunk(g: Hypergraph, cid: str) -> str:
    return f"SOURCE {cid}: {g.chunks[cid]}"


def _fill(section: Section, candidates: list[Block]):
    # first fit by priority; oversized blocks are skipped, never truncated
    used = 0
    for b in candidates:
        if used + b.tokens <= section.budget:
            section.blocks.append(b)
            used += b.tokens


def pack(
    chains: Iterable,
    g: Hypergraph,
    cfg: BudgetConfig = BudgetConfig(),
    counter: Callable[[str], int] = count_tokens,
) -> ContextBundle:
    """Fill hyperedges, then entities, then chunks, passing leftover budget on.

    Facts and entities are ranked by their best chain score, then by
    connectivity (summed participant degree for facts, degree for
    entities), then by id.
    """
    fact_score: dict[str, float] = {}
    for c in chains:
        fid = c.triple.fact
        fact_score[fid] = max(fact_score.get(fid, float("-inf")), c.score)
    ent_score: dict[str, float] = {}
    for fid, s in fact_score.items():
        for e in g.facts[fid].entities:
            ent_score[e] = max(ent_score.get(e, float("-inf")), s)

    def conn(fid):
        return sum(g.degree(e) for e in g.facts[fid].entities)

    fact_order = sorted(fact_score, key=lambda f: (-fact_score[f], -conn(f), f))
    ent_order = sorted(ent_score, key=lambda e: (-ent_score[e], -g.degree(e), e))

    h_budget, e_budget, c_budget = cfg.allocations()
    sections = []

    sec = Section("hyperedges", h_budget)
    _fill(sec, [_block(fid, render_fact(g, fid), fact_score[fid], counter) for fid in fact_order])
    sections.append(sec)

    sec = Section("entities", e_budget, sec.budget - sec.used)
    _fill(sec, [_block(eid, render_entity(g, eid), ent_score[eid], counter) for eid in ent_order])
    sections.append(sec)

    chunk_score: dict[str, float] = {}
    for b in sections[0].blocks:
        for cid in g.facts[b.source_id].chunk_ids:
            chunk_score[cid] = max(chunk_score.get(cid, float("-inf")), b.priority)
    for b in sections[1].blocks:
        for cid in g.entities[b.source_id].chunk_ids:
            chunk_score[cid] = max(chunk_score.get(cid, float("-inf")), b.priority)
    chunk_order = sorted(chunk_score, key=lambda c: (-chunk_score[c], c))
    sec = Section("chunks", c_budget, sec.budget - sec.used)
    _fill(sec, [_block(cid, render_chunk(g, cid), chunk_score[cid], counter) for cid in chunk_order])
    sections.append(sec)

    return ContextBundle(sections, cfg.total_tokens)


def _block(source_id, text, priority, counter) -> Block:
    return Block(source_id, text, float(priority), int(counter(text)))
