"""Dataset evaluation runs and the native-vs-binary cost benchmark."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .chains import Question, extract_topic_entities
from .context import BudgetConfig, count_tokens, pack
from .exceptions import HyperRAGError
from .retriever import rank_entities, resolve_answers
from .store import Hypergraph, RoleBoundQuery, answer_binary, reify_binary

logger = logging.getLogger(__name__)

BENCH_COLUMNS = ("query_id", "path", "postings_scanned", "records_read", "role_chases", "wall_ns", "tokens_retrieved")
PIPELINES = ("hyper-retriever", "hyper-memory")


# -- cost benchmark ---------------------------------------------------------


@dataclass
class BenchRow:
    query_id: str
    path: str
    postings_scanned: int
    records_read: int
    role_chases: int
    wall_ns: int
    tokens_retrieved: int
    out: int
    k: int
    mean_arity: float


@dataclass
class BenchReport:
    rows: list[BenchRow]

    def path_rows(self, path):
        return [r for r in self.rows if r.path == path]

    def summary(self) -> dict:
        out = {}
        for path in ("native", "binary"):
            rows = self.path_rows(path)
            if not rows:
                continue
            hits = [r for r in rows if r.out]
            out[path] = {
                "queries": len(rows),
                "mean_postings_scanned": float(np.mean([r.postings_scanned for r in rows])),
                "mean_records_read": float(np.mean([r.records_read for r in rows])),
                "mean_role_chases": float(np.mean([r.role_chases for r in rows])),
                "mean_wall_ns": float(np.mean([r.wall_ns for r in rows])),
                "chases_per_out": float(sum(r.role_chases for r in hits) / max(1, sum(r.out for r in hits))),
                "expected_chases_per_out": float(
                    sum((r.mean_arity - r.k) * r.out for r in hits) / max(1, sum(r.out for r in hits))
                ),
            }
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(BENCH_COLUMNS)
            for r in self.rows:
                w.writerow([getattr(r, c) for c in BENCH_COLUMNS])


def _tokens(g: Hypergraph, matches) -> int:
    return sum(count_tokens(" ".join(g.entities[e].name for _, e in m.unbound)) for m in matches)


def run_cost_bench(g: Hypergraph, queries, view=None) -> BenchReport:
    """Run every query on both paths; ``queries`` is an iterable of (id, RoleBoundQuery)."""
    view = view or reify_binary(g)
    rows = []
    for qid, query in queries:
        t0 = time.perf_counter_ns()
        native, nc = g.answer_native(query)
        t1 = time.perf_counter_ns()
        binary, bc = answer_binary(view, query)
        t2 = time.perf_counter_ns()
        if {m.fact_id for m in native} != {m.fact_id for m in binary}:
            raise AssertionError(f"query {qid}: native and binary match sets differ")
        arity = float(np.mean([g.facts[m.fact_id].arity for m in native])) if native else 0.0
        rows.append(BenchRow(qid, "native", nc.postings_scanned, nc.records_read, nc.role_chases,
                             t1 - t0, _tokens(g, native), len(native), query.k, arity))
        rows.append(BenchRow(qid, "binary", bc.postings_scanned, bc.records_read, bc.role_chases,
                             t2 - t1, _tokens(g, binary), len(binary), query.k, arity))
    return BenchReport(rows)


def sample_queries(g: Hypergraph, k: int, n: int, seed: int = 0):
    """Role-typed queries made by binding k arguments of random facts."""
    rng = np.random.default_rng(seed)
    eligible = [f for f in g.facts.values() if f.arity >= k]
    if not eligible:
        raise ValueError(f"no fact has arity >= {k}")
    out = []
    for i in range(n):
        fact = eligible[int(rng.integers(len(eligible)))]
        picks = sorted(rng.choice(fact.arity, size=k, replace=False))
        bindings = tuple(fact.args[j] for j in picks)
        try:
            out.append((f"q{i:05d}", RoleBoundQuery(bindings)))
        except ValueError:
            continue
    return out


def arity_sweep(arities=range(2, 9), k=2, n_facts=60, n_queries=40, seed=0):
    """Binary-path chases per output for fixed-arity graphs, plus the fitted slope."""
    from .synthetic import fixed_arity_graph

    xs, ys = [], []
    for n in arities:
        g = fixed_arity_graph(n, n_facts=n_facts, seed=seed + n)
        report = run_cost_bench(g, sample_queries(g, k, n_queries, seed))
        xs.append(n)
        ys.append(report.summary()["binary"]["chases_per_out"])
    slope = float(np.polyfit(xs, ys, 1)[0]) if len(xs) > 1 else float("nan")
    return xs, ys, slope


# -- dataset evaluation -------------------------------------------------------


@dataclass
class EvalRecord:
    question_id: str
    pipeline: str
    mode: str
    seeds: list[str] = field(default_factory=list)
    ranked: list[str] = field(default_factory=list)
    prediction: str = ""
    gold: list[str] = field(default_factory=list)
    retrieval_ns: int = 0
    tokens_retrieved: int = 0
    chains: int = 0
    native_role_chases: int = 0
    binary_role_chases: int = 0
    max_arity: int = 0
    error: str | None = None


@dataclass
class EvalReport:
    records: list[EvalRecord]
    metrics: dict

    def write(self, out_dir):
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "results.jsonl", "w") as fh:
            for r in self.records:
                fh.write(json.dumps(asdict(r)) + "\n")
        with open(d / "results.csv", "w", newline="") as fh:
            cols = [k for k in asdict(self.records[0]) if k not in ("seeds", "ranked", "gold")]
            w = csv.writer(fh)
            w.writerow(cols)
            for r in self.records:
                rec = asdict(r)
                w.writerow([rec[c] for c in cols])
        (d / "metrics.json").write_text(json.dumps(self.metrics, indent=2, sort_keys=True) + "\n")


def seed_costs(g: Hypergraph, view, seeds) -> tuple[int, int]:
    """Role chases on each path when materializing every fact incident to a seed."""
    native = binary = 0
    for s in seeds:
        q = RoleBoundQuery(((None, s),))
        native += g.answer_native(q)[1].role_chases
        binary += answer_binary(view, q)[1].role_chases
    return native, binary


def run_eval(
    questions,
    graph: Hypergraph,
    pipeline: str = "hyper-retriever",
    mode: str = "closed",
    *,
    retriever=None,
    memory=None,
    gateway=None,
    budget: BudgetConfig = BudgetConfig(),
    ranking: str | None = None,
    binary_ablation: bool = False,
    retrieval_graph: Hypergraph | None = None,
    ks=(1, 5, 10),
    out_dir=None,
    workers: int = 1,
) -> EvalReport:
    """Evaluate one pipeline over a question set.

    Closed mode ranks entities: by best chain score (``ranking="retrieval"``,
    the hyper-retriever default) or from the generator's list
    (``"generator"``, the hyper-memory default); entities outside the
    question's candidates are dropped. Open mode generates one answer and
    scores EM/F1. With ``binary_ablation`` retrieval runs over the
    event-reified graph (``retrieval_graph`` if given). Up to ``workers``
    questions run concurrently; records keep question order.
    """
    questions = list(questions)
    if not questions:
        raise ValueError("no questions")
    if pipeline not in PIPELINES:
        raise ValueError(f"unknown pipeline {pipeline!r}")
    if mode not in ("open", "closed"):
        raise ValueError(f"unknown mode {mode!r}")
    ranking = ranking or ("retrieval" if pipeline == "hyper-retriever" else "generator")
    view = reify_binary(graph)
    rgraph = graph
    if binary_ablation:
        rgraph = retrieval_graph or graph.to_binary_graph()

    def one(q):
        rec = EvalRecord(q.id, pipeline, mode, gold=list(q.gold_answers))
        try:
            _evaluate_one(q, rec, graph, rgraph, view, pipeline, mode, ranking, retriever, memory, gateway, budget)
        except HyperRAGError as exc:
            rec.error = f"{type(exc).__name__}: {exc}"
            logger.warning("question %s failed: %s", q.id, rec.error)
        return rec

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, questions))
    else:
        records = [one(q) for q in questions]

    report = EvalReport(records, _aggregate(records, questions, graph, mode, ks, binary_ablation, pipeline))
    if out_dir is not None:
        report.write(out_dir)
    return report


def _evaluate_one(q, rec, graph, rgraph, view, pipeline, mode, ranking, retriever, memory, gateway, budget):
    seeds = extract_topic_entities(q, graph, gateway)
    rec.seeds = seeds
    rec.native_role_chases, rec.binary_role_chases = seed_costs(graph, view, seeds)
    rec.max_arity = max((graph.facts[f].arity for s in seeds for f in graph.incident_facts(s)), default=0)

    t0 = time.perf_counter_ns()
    if pipeline == "hyper-retriever":
        chains = retriever.retrieve(q, rgraph, seeds)
    else:
        result = memory.retrieve(q, rgraph, seeds)
        if result.error:
            rec.error = result.error
        chains = result.retained
    rec.retrieval_ns = time.perf_counter_ns() - t0
    rec.chains = len(chains)
    bundle = pack(chains, rgraph, budget)
    rec.tokens_retrieved = bundle.used

    if mode == "open":
        rec.prediction = gateway.generate_answer(bundle.text, q, "open")
        return
    if ranking == "retrieval":
        ranked = rank_entities(chains, exclude=seeds)
    else:
        ranked = resolve_answers(rgraph, gateway.generate_answer(bundle.text, q, "closed"))
    if q.candidates is not None:
        allowed = set(q.candidates)
        ranked = [e for e in ranked if e in allowed]
    rec.ranked = ranked


def _aggregate(records, questions, graph, mode, ks, binary_ablation, pipeline) -> dict:
    out = {
        "pipeline": pipeline,
        "mode": mode,
        "binary_ablation": binary_ablation,
        "questions": len(records),
        "errors": sum(1 for r in records if r.error),
        "mean_retrieval_ms": float(np.mean([r.retrieval_ns for r in records]) / 1e6),
        "mean_tokens_retrieved": float(np.mean([r.tokens_retrieved for r in records])),
        "mean_native_role_chases": float(np.mean([r.native_role_chases for r in records])),
        "mean_binary_role_chases": float(np.mean([r.binary_role_chases for r in records])),
    }
    if mode == "closed":
        results = [
            metrics.RankingResult(r.question_id, r.ranked, set(resolve_answers(graph, q.gold_answers)))
            for r, q in zip(records, questions)
        ]
        out["mrr"] = metrics.mrr(results)
        for k in ks:
            out[f"hits@{k}"] = metrics.hits_at_k(results, k)
    else:
        results = [metrics.AnswerResult(r.question_id, r.prediction, r.gold) for r in records]
        out["em"] = metrics.em(results)
        out["f1"] = metrics.f1(results)
    return out
