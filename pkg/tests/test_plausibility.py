import json

import numpy as np
import pytest
from sklearn.base import clone

from hyperrag.chains import PseudoTriple
from hyperrag.dde import DdeConfig, propagate
from hyperrag.embedding import HashingEmbedder
from hyperrag.exceptions import CheckpointError
from hyperrag.plausibility import (
    PlausibilityMLP,
    bce,
    feature_dim,
    featurize,
    featurize_many,
    forward,
    sigmoid,
    write_history,
)
from hyperrag.store import Entity, Hypergraph, NaryFact


@pytest.fixture
def toy():
    g = Hypergraph.build([Entity("A", "Alpha"), Entity("B", "Beta"), Entity("C", "Gamma")],
                         [NaryFact("f", "alpha meets beta", ((None, "A"), (None, "B"), (None, "C")))])
    table = propagate([PseudoTriple("A", "f", "B"), PseudoTriple("A", "f", "C")], DdeConfig(2))
    return g, table


def _separable(n=120, d=6, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(int)
    return X, y


def test_feature_layout(toy):
    g, table = toy
    emb = HashingEmbedder(64)
    x = featurize("who meets beta?", PseudoTriple("A", "f", "B"), table, g, emb)
    assert x.shape == (feature_dim(64, 2),) == (266,)
    assert np.array_equal(x[:64], emb.embed("who meets beta?"))
    assert np.array_equal(x[64:128], emb.embed("Alpha"))
    assert np.array_equal(x[128:192], emb.embed("alpha meets beta"))
    assert np.array_equal(x[192:256], emb.embed("Beta"))
    assert np.array_equal(x, featurize("who meets beta?", PseudoTriple("A", "f", "B"), table, g, emb))
    assert featurize_many("q", [], table, g, emb).shape == (0, 266)
    with pytest.raises(KeyError):
        featurize("q", PseudoTriple("A", "nope", "B"), table, g, emb)


def test_sigmoid_stable_and_bce_floor():
    assert np.all(np.isfinite(sigmoid(np.array([-1000.0, 0.0, 1000.0]))))
    assert sigmoid(np.array([0.0]))[0] == 0.5
    assert bce([1.0, 0.0], [1, 0]) == pytest.approx(-np.log(1 - 1e-7))
    assert bce([0.3], [1]) >= 0


def test_zero_final_layer_gives_half():
    X, y = _separable()
    m = PlausibilityMLP(hidden_layer_sizes=(8,), max_epochs=1).fit(X, y)
    m.layers_[-1][0][:] = 0
    m.layers_[-1][1][:] = 0
    assert np.all(m.score_samples(X) == 0.5)
    lo = m.score_samples(X[:1])[0]
    m.layers_[-1][1][:] = 0.3
    assert m.score_samples(X[:1])[0] > lo


def test_separable_toy_learns():
    X, y = _separable(200)
    m = PlausibilityMLP(hidden_layer_sizes=(32,), learning_rate=1e-2, max_epochs=50).fit(X, y)
    assert m.score(X, y) > 0.95
    assert m.score_samples(X[y == 1]).mean() > 0.9
    assert m.predict_proba(X).shape == (200, 2)


def test_early_stopping_bound():
    X, y = _separable(200, seed=1)
    m = PlausibilityMLP(hidden_layer_sizes=(16,), learning_rate=5e-2, max_epochs=200, patience=3).fit(X, y)
    assert len(m.history_) <= m.best_epoch_ + 3
    assert m.history_[m.best_epoch_ - 1].val_loss == min(h.val_loss for h in m.history_)


def test_group_split_holds_out_whole_groups():
    X, y = _separable(100)
    groups = np.repeat([f"q{i}" for i in range(20)], 5)
    m = PlausibilityMLP(validation_fraction=0.1)
    train, val = m._split(100, groups, np.random.default_rng(0))
    assert set(groups[train]).isdisjoint(groups[val])
    assert len(set(groups[val])) == 2


def test_fit_errors():
    X, y = _separable(20)
    with pytest.raises(ValueError, match="both"):
        PlausibilityMLP().fit(X, np.ones(20))
    with pytest.raises(ValueError):
        PlausibilityMLP().fit(X, y * 2)
    m = PlausibilityMLP(max_epochs=1).fit(X, y)
    with pytest.raises(ValueError, match="features"):
        m.score_samples(np.zeros((1, 3)))


def test_estimator_api():
    m = PlausibilityMLP(learning_rate=0.5)
    assert m.get_params()["learning_rate"] == 0.5
    assert clone(m).set_params(batch_size=8).batch_size == 8


def test_checkpoint_round_trip_exact(tmp_path):
    X, y = _separable(50)
    m = PlausibilityMLP(hidden_layer_sizes=(8, 4), max_epochs=3).fit(X, y)
    m.save(tmp_path / "m.json", embed_dim=64)
    back = PlausibilityMLP.load(tmp_path / "m.json")
    probe = np.random.default_rng(9).normal(size=(100, 6))
    assert np.max(np.abs(back.score_samples(probe) - m.score_samples(probe))) == 0
    assert back.hidden_layer_sizes == (8, 4)
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["version"] == 1 and set(doc["layers"][0]) == {"w", "b"}


def test_checkpoint_errors(tmp_path):
    X, y = _separable(50)
    m = PlausibilityMLP(hidden_layer_sizes=(4,), max_epochs=1).fit(X, y)
    path = tmp_path / "m.json"
    m.save(path, embed_dim=64)
    text = path.read_text()
    (tmp_path / "cut.json").write_text(text[: len(text) // 2])
    with pytest.raises(CheckpointError, match="byte"):
        PlausibilityMLP.load(tmp_path / "cut.json")
    with pytest.raises(CheckpointError, match="64.*32"):
        PlausibilityMLP.load(path, embed_dim=32)
    doc = json.loads(text)
    doc["version"] = 2
    with pytest.raises(CheckpointError, match="version"):
        PlausibilityMLP.from_checkpoint(doc)
    doc = json.loads(text)
    doc["layers"][1]["w"] = [[1.0]]
    with pytest.raises(CheckpointError, match="inconsistent"):
        PlausibilityMLP.from_checkpoint(doc)


def test_deterministic_training_and_history(tmp_path):
    X, y = _separable(80)
    a = PlausibilityMLP(hidden_layer_sizes=(8,), max_epochs=5, optimizer="sgd").fit(X, y)
    b = PlausibilityMLP(hidden_layer_sizes=(8,), max_epochs=5, optimizer="sgd").fit(X, y)
    assert all(np.array_equal(p, q) for la, lb in zip(a.layers_, b.layers_) for p, q in zip(la, lb))
    write_history(a.history_, tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss" and len(lines) == 6


def test_forward_shapes():
    X, y = _separable(10)
    m = PlausibilityMLP(hidden_layer_sizes=(5, 3), max_epochs=1).fit(X, y)
    logits, acts = forward(m.layers_, X)
    assert logits.shape == (10,) and [a.shape[1] for a in acts] == [6, 5, 3, 1]
