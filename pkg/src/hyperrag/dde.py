"""Directional distance encoding over a set of pseudo-binary triples.

Each entity in the triple set gets ``2L + 1`` channels laid out as
``(s0, s1..sL, r1..rL)``: the shared head indicator, L rounds of forward
(head to tail) mean propagation and L rounds of backward (tail to head)
propagation. An entity with no neighbours in the propagation direction
receives 0 for that round.
"""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from .chains import PseudoTriple

DEFAULT_LAYERS = 2


@dataclass(frozen=True)
class DdeConfig:
    layers: int = DEFAULT_LAYERS

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("DDE needs at least one layer")

    @property
    def entity_dim(self) -> int:
        return 2 * self.layers + 1

    @property
    def triple_dim(self) -> int:
        return 2 * self.entity_dim


class DdeTable(dict):
    """Entity id -> encoding vector of length ``2L + 1``."""

    def __init__(self, vectors, layers: int):
        super().__init__(vectors)
        self.layers = layers


def init_indicator(triples: Iterable[PseudoTriple]) -> dict[str, float]:
    """1 for every entity that heads some triple, 0 for the other participants."""
    out: dict[str, float] = {}
    for h, _, t in triples:
        out[h] = 1.0
        out.setdefault(t, 0.0)
    return out


def _neighbours(triples: Iterable[PseudoTriple]):
    fwd: dict[str, set[str]] = defaultdict(set)  # tail -> heads
    bwd: dict[str, set[str]] = defaultdict(set)  # head -> tails
    for h, _, t in triples:
        fwd[t].add(h)
        bwd[h].add(t)
    return {k: sorted(v) for k, v in fwd.items()}, {k: sorted(v) for k, v in bwd.items()}


def _round(prev: Mapping[str, float], nbrs: Mapping[str, list[str]], order: list[str]) -> dict[str, float]:
    out = {}
    for e in order:
        ns = nbrs.get(e)
        if not ns:
            out[e] = 0.0
            continue
        acc = 0.0
        for n in ns:
            acc += prev[n]
        out[e] = acc / len(ns)
    return out


def propagate(
    triples: Iterable[PseudoTriple],
    config: DdeConfig | None = None,
    indicator: Mapping[str, float] | None = None,
) -> DdeTable:
    """Run L forward and L backward mean-propagation rounds.

    ``indicator`` overrides the head indicator (entities missing from it
    start at 0).
    """
    config = config or DdeConfig()
    triples = set(triples)
    base = init_indicator(triples)
    order = sorted(base)
    if indicator is not None:
        base = {e: float(indicator.get(e, 0.0)) for e in order}
    fwd_nbrs, bwd_nbrs = _neighbours(triples)

    forward = [base]
    backward = [base]
    for _ in range(config.layers):
        forward.append(_round(forward[-1], fwd_nbrs, order))
        backward.append(_round(backward[-1], bwd_nbrs, order))

    vectors = {}
    for e in order:
        chans = [f[e] for f in forward] + [b[e] for b in backward[1:]]
        vectors[e] = np.asarray(chans, dtype=np.float64)
    return DdeTable(vectors, config.layers)


def triple_encoding(table: DdeTable, triple: PseudoTriple) -> np.ndarray:
    """Concatenate the head and tail entity encodings."""
    try:
        return np.concatenate([table[triple.head], table[triple.tail]])
    except KeyError as exc:
        raise KeyError(f"entity {exc.args[0]!r} is not covered by the DDE table") from None
