"""HyperRetriever: learned plausibility scoring with adaptive threshold search."""

from __future__ import annotations

import enum
import logging
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from .chains import (
    DEFAULT_HOP_CAP,
    PseudoTriple,
    Question,
    build_supervision,
    derive_triples,
    extract_topic_entities,
    triples_from,
)
from .dde import DdeConfig, propagate
from .embedding import HashingEmbedder
from .exceptions import CheckpointError
from .plausibility import PlausibilityMLP, featurize_many
from .store import Hypergraph

logger = logging.getLogger(__name__)


class DensityMode(str, enum.Enum):
    LOW = "low"
    MID = "mid"
    HIGH = "high"


@dataclass(frozen=True)
class SearchConfig:
    tau0: float = 0.5
    n_max: int = 5
    min_per_hop: int = 50
    decay: float = 0.1
    density_lo: float = 2.35
    density_up: float = 5.0
    high_density_cap: int = 200
    max_hops: int = 4

    def __post_init__(self):
        if not 0 < self.decay < self.tau0:
            raise ValueError("need 0 < decay < tau0")
        if self.n_max < 0 or self.min_per_hop < 1 or self.max_hops < 1 or self.high_density_cap < 1:
            raise ValueError("n_max >= 0, min_per_hop >= 1, max_hops >= 1 and high_density_cap >= 1 required")
        if not self.density_lo < self.density_up:
            raise ValueError("density_lo must be below density_up")


@dataclass(frozen=True)
class ScoredChain:
    triple: PseudoTriple
    score: float
    hop: int
    accepted_at: float

    def to_record(self) -> dict:
        return {**self.triple.to_record(), "score": self.score, "hop": self.hop, "tau": self.accepted_at}


def classify_density(density: float | Hypergraph, cfg: SearchConfig = SearchConfig()) -> DensityMode:
    if isinstance(density, Hypergraph):
        density = density.density
    if density <= cfg.density_lo:
        return DensityMode.LOW
    if density <= cfg.density_up:
        return DensityMode.MID
    return DensityMode.HIGH


def threshold_schedule(cfg: SearchConfig = SearchConfig()) -> list[float]:
    """tau0, tau0 - c, ... for at most n_max reductions, floored at 0.

    Repeated zeros at the tail are collapsed.
    """
    out = []
    for j in range(cfg.n_max + 1):
        tau = max(0.0, round(cfg.tau0 - j * cfg.decay, 12))
        if out and tau == out[-1]:
            break
        out.append(tau)
    return out


def filter_at(scores: np.ndarray, tau: float) -> np.ndarray:
    return np.flatnonzero(np.asarray(scores) >= tau)


def adaptive_filter(scores, schedule: Sequence[float], minimum: int):
    """Lower the threshold along ``schedule`` until ``minimum`` items pass.

    Returns (kept indices, final threshold, number of reductions).
    """
    scores = np.asarray(scores, dtype=np.float64)
    j = 0
    kept = filter_at(scores, schedule[0])
    while len(kept) < minimum and j < len(schedule) - 1:
        j += 1
        kept = filter_at(scores, schedule[j])
    return kept, schedule[j], j


def _cap_key(item):
    t, s = item
    return (-s, t.fact, t.head, t.tail)


ScoreFn = Callable[[list[PseudoTriple], set], np.ndarray]


def adaptive_search(
    g: Hypergraph,
    seeds: Iterable[str],
    score_fn: ScoreFn,
    cfg: SearchConfig = SearchConfig(),
    trace: list | None = None,
) -> list[ScoredChain]:
    """Threshold-filtered frontier expansion with density-aware post-processing.

    ``score_fn(triples, expanded)`` returns one plausibility per triple;
    ``expanded`` is the set of entities expanded so far, including the
    heads being scored.
    """
    schedule = threshold_schedule(cfg)
    mode = classify_density(g, cfg)
    seeds = sorted(set(seeds))
    scores: dict[PseudoTriple, float] = {}
    retained: dict[PseudoTriple, ScoredChain] = {}
    discarded: dict[PseudoTriple, int] = {}
    per_hop: dict[int, int] = {}
    visited = set(seeds)
    expanded: set[str] = set()
    lowest_tau = [schedule[0]]

    def log(hop, tau, triple, score, action):
        if trace is not None:
            trace.append({"hop": hop, "tau": tau, "triple": triple.to_record(), "score": score, "action": action})

    def run(frontier, hop):
        while frontier and hop < cfg.max_hops:
            hop += 1
            expanded.update(frontier)
            cands = sorted(
                {t for h in frontier for t in triples_from(g, h) if t not in retained},
                key=PseudoTriple.sort_key,
            )
            fresh = [t for t in cands if t not in scores]
            if fresh:
                for t, s in zip(fresh, score_fn(fresh, set(expanded))):
                    scores[t] = float(s)
            cand_scores = np.array([scores[t] for t in cands])
            idx, tau, _ = adaptive_filter(cand_scores, schedule, cfg.min_per_hop) if cands else ([], schedule[0], 0)
            lowest_tau[0] = min(lowest_tau[0], tau)
            kept_set = set(int(i) for i in idx)
            kept = [(cands[i], scores[cands[i]]) for i in sorted(kept_set)]
            if mode is DensityMode.HIGH and len(kept) > cfg.high_density_cap:
                kept.sort(key=_cap_key)
                for t, s in kept[cfg.high_density_cap :]:
                    discarded[t] = hop
                    log(hop, tau, t, s, "cap-evict")
                kept = kept[: cfg.high_density_cap]
            kept_triples = {t for t, _ in kept}
            for i, t in enumerate(cands):
                if t in kept_triples:
                    retained[t] = ScoredChain(t, scores[t], hop, tau)
                    log(hop, tau, t, scores[t], "retain")
                elif i not in kept_set:
                    discarded.setdefault(t, hop)
                    log(hop, tau, t, scores[t], "discard")
            per_hop[hop] = per_hop.get(hop, 0) + len(kept)
            if not kept:
                break
            frontier = sorted({t.tail for t in kept_triples} - visited)
            visited.update(frontier)

    run(seeds, 0)

    final_tau = lowest_tau[0]
    rescued = []
    for t in sorted(discarded, key=lambda t: (discarded[t], t.sort_key())):
        if t in retained or scores[t] < final_tau:
            continue
        hop = discarded[t]
        if mode is DensityMode.HIGH and per_hop.get(hop, 0) >= cfg.high_density_cap:
            continue
        retained[t] = ScoredChain(t, scores[t], hop, final_tau)
        per_hop[hop] = per_hop.get(hop, 0) + 1
        rescued.append(t)
        log(hop, final_tau, t, scores[t], "rescue")

    if rescued and mode is not DensityMode.LOW:
        tails = sorted({t.tail for t in rescued} - visited)
        visited.update(tails)
        if tails:
            run(tails, min(retained[t].hop for t in rescued))

    return sorted(retained.values(), key=lambda c: (c.hop, -c.score, c.triple.sort_key()))


def rank_entities(chains: Iterable[ScoredChain], exclude: Iterable[str] = ()) -> list[str]:
    """Tail entities ordered by their best chain score."""
    best: dict[str, tuple[float, int]] = {}
    skip = set(exclude)
    for c in chains:
        t = c.triple.tail
        if t in skip:
            continue
        key = (c.score, -c.hop)
        if t not in best or key > best[t]:
            best[t] = key
    return sorted(best, key=lambda e: (-best[e][0], -best[e][1], e))


def resolve_answers(g: Hypergraph, answers: Iterable[str]) -> list[str]:
    out = []
    for a in answers:
        hits = [a] if a in g.entities else g.resolve_name(a)
        for h in hits:
            if h not in out:
                out.append(h)
    return out


class HyperRetriever(BaseEstimator):
    """Learned relational-chain retriever.

    ``fit`` builds shortest-path supervision from question/answer pairs,
    featurizes each candidate triple (query, head, fact and tail embeddings
    plus its directional distance encoding) and trains ``model``.
    ``retrieve`` runs the adaptive threshold search with the trained scorer.
    """

    def __init__(
        self,
        embedder=None,
        model=None,
        dde_layers=2,
        tau0=0.5,
        n_max=5,
        min_per_hop=50,
        decay=0.1,
        density_lo=2.35,
        density_up=5.0,
        high_density_cap=200,
        max_hops=4,
        supervision_hops=DEFAULT_HOP_CAP,
        max_negatives=8,
    ):
        self.embedder = embedder
        self.model = model
        self.dde_layers = dde_layers
        self.tau0 = tau0
        self.n_max = n_max
        self.min_per_hop = min_per_hop
        self.decay = decay
        self.density_lo = density_lo
        self.density_up = density_up
        self.high_density_cap = high_density_cap
        self.max_hops = max_hops
        self.supervision_hops = supervision_hops
        self.max_negatives = max_negatives

    @property
    def search_config(self) -> SearchConfig:
        return SearchConfig(
            tau0=self.tau0,
            n_max=self.n_max,
            min_per_hop=self.min_per_hop,
            decay=self.decay,
            density_lo=self.density_lo,
            density_up=self.density_up,
            high_density_cap=self.high_density_cap,
            max_hops=self.max_hops,
        )

    def _embedder(self):
        if self.embedder is None:
            self.embedder = HashingEmbedder()
        return self.embedder

    def _features(self, g, text, triples, expanded):
        dcfg = DdeConfig(self.dde_layers)
        table = propagate(derive_triples(g, sorted(expanded)), dcfg)
        return featurize_many(text, triples, table, g, self._embedder())

    def build_training_set(self, questions: Iterable[Question], g: Hypergraph, gateway=None):
        """Return (X, y, groups) from shortest-path supervision.

        Negatives are cut to ``max_negatives`` per positive per hop, keeping
        the first in (fact, head, tail) order.
        """
        blocks, labels, groups = [], [], []
        for q in questions:
            seeds = extract_topic_entities(q, g, gateway)
            answers = resolve_answers(g, q.gold_answers)
            sup = build_supervision(g, q, seeds, answers, self.supervision_hops)
            if sup is None:
                continue
            expanded = set(seeds)
            for i, pos in sup.positives:
                expanded.add(pos.head)
                negs = sorted((t for h, t in sup.negatives if h == i), key=PseudoTriple.sort_key)
                negs = negs[: self.max_negatives]
                triples = [pos, *negs]
                blocks.append(self._features(g, q.text, triples, expanded))
                labels.extend([1] + [0] * len(negs))
                groups.extend([q.id] * len(triples))
        if not blocks:
            raise ValueError("no question produced supervision")
        return np.vstack(blocks), np.asarray(labels), np.asarray(groups)

    def fit(self, questions, y=None, *, graph: Hypergraph, gateway=None):
        X, labels, groups = self.build_training_set(questions, graph, gateway)
        self.model_ = clone(self.model) if self.model is not None else PlausibilityMLP()
        self.model_.fit(X, labels, groups=groups)
        self.n_training_rows_ = len(labels)
        return self

    def scorer(self, g: Hypergraph, question_text: str) -> ScoreFn:
        check_is_fitted(self, "model_")

        def score(triples, expanded):
            return self.model_.score_samples(self._features(g, question_text, triples, expanded))

        return score

    def retrieve(self, question: Question, graph: Hypergraph, seeds=None, gateway=None, trace=None):
        if seeds is None:
            seeds = extract_topic_entities(question, graph, gateway)
        return adaptive_search(graph, seeds, self.scorer(graph, question.text), self.search_config, trace)

    def predict(self, questions, *, graph: Hypergraph, gateway=None):
        """Ranked candidate entity ids per question."""
        out = []
        for q in questions:
            seeds = extract_topic_entities(q, graph, gateway)
            ranked = rank_entities(self.retrieve(q, graph, seeds), exclude=seeds)
            if q.candidates is not None:
                allowed = set(q.candidates)
                ranked = [e for e in ranked if e in allowed]
            out.append(ranked)
        return out

    # -- persistence ---------------------------------------------------

    _SEARCH_PARAMS = ("dde_layers", "tau0", "n_max", "min_per_hop", "decay", "density_lo", "density_up",
                      "high_density_cap", "max_hops", "supervision_hops", "max_negatives")

    def save(self, path):
        check_is_fitted(self, "model_")
        emb = self._embedder()
        extra = {k: getattr(self, k) for k in self._SEARCH_PARAMS}
        self.model_.save(path, embed_dim=emb.dimension, embedder=emb.backend_id, **extra)

    @classmethod
    def load(cls, path, embedder=None, **overrides) -> HyperRetriever:
        """Rebuild a fitted retriever; ``overrides`` replace stored search settings."""
        embedder = embedder or HashingEmbedder()
        probe = PlausibilityMLP.load(path)
        cfg = probe.checkpoint_config_
        model = PlausibilityMLP.load(path, embed_dim=embedder.dimension, layers=cfg.get("dde_layers"))
        params = {k: cfg[k] for k in cls._SEARCH_PARAMS if k in cfg}
        params.update(overrides)
        est = cls(embedder=embedder, **params)
        expected = 4 * embedder.dimension + 2 * (2 * est.dde_layers + 1)
        if model.n_features_in_ != expected:
            raise CheckpointError(f"checkpoint expects {model.n_features_in_} features, configuration gives {expected}")
        est.model_ = model
        return est
