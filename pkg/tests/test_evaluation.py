import csv
import json

import numpy as np
import pytest

from hyperrag.embedding import HashingEmbedder
from hyperrag.evaluation import BENCH_COLUMNS, arity_sweep, run_cost_bench, run_eval, sample_queries, seed_costs
from hyperrag.llm import LlmGateway, ScriptedBackend
from hyperrag.memory import HyperMemory
from hyperrag.plausibility import PlausibilityMLP
from hyperrag.retriever import HyperRetriever
from hyperrag.store import reify_binary
from hyperrag.synthetic import fixed_arity_graph, planted_film_qa


def test_arity_five_bench(tmp_path):
    g = fixed_arity_graph(5, n_facts=80, seed=1)
    report = run_cost_bench(g, sample_queries(g, 2, 60, seed=1))
    s = report.summary()
    assert s["binary"]["chases_per_out"] == 3.0 and s["native"]["chases_per_out"] == 0.0
    report.write_csv(tmp_path / "bench.csv")
    rows = list(csv.reader(open(tmp_path / "bench.csv")))
    assert tuple(rows[0]) == BENCH_COLUMNS and len(rows) == 121


def test_fully_bound_queries_cost_nothing():
    g = fixed_arity_graph(4, n_facts=30, seed=2)
    report = run_cost_bench(g, sample_queries(g, 4, 20))
    assert all(r.role_chases == 0 for r in report.rows)


def test_arity_sweep_slope():
    xs, ys, slope = arity_sweep(range(2, 6), k=1)
    assert ys == [1.0, 2.0, 3.0, 4.0] and slope == pytest.approx(1.0, abs=1e-12)


def test_seed_costs():
    g = fixed_arity_graph(3, n_facts=10, seed=0)
    seed = next(iter(g.entity_incidence))
    native, binary = seed_costs(g, reify_binary(g), [seed])
    assert native == 0 and binary == 2 * g.degree(seed)


@pytest.fixture(scope="module")
def data():
    return planted_film_qa(6, seed=11)


def test_empty_dataset(data):
    with pytest.raises(ValueError, match="no questions"):
        run_eval([], data.graph)


def test_generator_ranking_and_outputs(data, tmp_path):
    gw = LlmGateway(ScriptedBackend(data.script))
    report = run_eval(data.questions, data.graph, "hyper-memory", "closed", memory=HyperMemory(gw), gateway=gw,
                      out_dir=tmp_path, workers=3)
    assert report.metrics["hits@1"] == 1.0 and report.metrics["mrr"] == 1.0
    assert [r.question_id for r in report.records] == [q.id for q in data.questions]
    lines = (tmp_path / "results.jsonl").read_text().splitlines()
    assert len(lines) == 6 and json.loads(lines[0])["pipeline"] == "hyper-memory"
    assert json.loads((tmp_path / "metrics.json").read_text())["questions"] == 6
    assert (tmp_path / "results.csv").exists()


def test_errors_are_recorded_not_raised(data):
    gw = LlmGateway(ScriptedBackend({"edge": {"*": 0.5}, "entity": {"*": 0.5}}), retries=1)
    report = run_eval(data.questions, data.graph, "hyper-memory", "open", memory=HyperMemory(gw), gateway=gw)
    assert report.metrics["errors"] == 6 and report.metrics["em"] == 0.0


def test_binary_ablation_uses_same_metrics(data):
    train = planted_film_qa(20, seed=12, prefix="t")
    r = HyperRetriever(embedder=HashingEmbedder(), model=PlausibilityMLP(max_epochs=20))
    r.fit(train.questions, graph=train.graph)
    native = run_eval(data.questions, data.graph, retriever=r)
    ablated = run_eval(data.questions, data.graph, retriever=r, binary_ablation=True)
    assert set(native.metrics) == set(ablated.metrics)
    assert ablated.metrics["binary_ablation"] and ablated.metrics["errors"] == 0
    assert np.mean([x.binary_role_chases for x in ablated.records]) > 0
