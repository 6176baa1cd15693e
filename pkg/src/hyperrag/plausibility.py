"""Triple featurization and the MLP plausibility classifier."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .chains import PseudoTriple
from .dde import DdeTable, triple_encoding
from .exceptions import CheckpointError

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
PROB_FLOOR = 1e-7


def feature_dim(embed_dim: int, layers: int) -> int:
    return 4 * embed_dim + 2 * (2 * layers + 1)


def featurize(question_text: str, triple: PseudoTriple, table: DdeTable, g, embedder) -> np.ndarray:
    """``[phi(q) | phi(head) | phi(fact) | phi(tail) | delta]`` for one triple."""
    return featurize_many(question_text, [triple], table, g, embedder)[0]


def featurize_many(question_text, triples, table: DdeTable, g, embedder) -> np.ndarray:
    triples = list(triples)
    if not triples:
        return np.zeros((0, feature_dim(embedder.dimension, table.layers)))
    texts = {question_text}
    for h, f, t in triples:
        if h not in g.entities or t not in g.entities:
            raise KeyError(f"triple {h!r}->{t!r} references an entity without text")
        if f not in g.facts:
            raise KeyError(f"triple references unknown fact {f!r}")
        texts.update((g.entities[h].name, g.facts[f].description, g.entities[t].name))
    ordered = sorted(texts)
    vecs = dict(zip(ordered, embedder.embed_batch(ordered)))
    qv = vecs[question_text]
    rows = []
    for tr in triples:
        rows.append(
            np.concatenate(
                [
                    qv,
                    vecs[g.entities[tr.head].name],
                    vecs[g.facts[tr.fact].description],
                    vecs[g.entities[tr.tail].name],
                    triple_encoding(table, tr),
                ]
            )
        )
    return np.vstack(rows)


# -- numerics ---------------------------------------------------------------


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce(p, y) -> float:
    """Mean binary cross-entropy with probabilities clamped away from 0 and 1."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_FLOOR, 1.0 - PROB_FLOOR)
    y = np.asarray(y, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def init_layers(sizes, rng: np.random.Generator):
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        layers.append([w, np.zeros(fan_out)])
    return layers


def forward(layers, X):
    """Return the output logits and the per-layer activations."""
    acts = [X]
    h = X
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        h = z if i == len(layers) - 1 else np.maximum(z, 0.0)
        acts.append(h)
    return h[:, 0], acts


def backward(layers, acts, dlogits):
    """Gradients of a loss w.r.t. each (w, b), given d loss / d logits."""
    grads = [None] * len(layers)
    delta = dlogits.reshape(-1, 1)
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        grads[i] = [acts[i].T @ delta, delta.sum(axis=0)]
        if i:
            delta = (delta @ w.T) * (acts[i] > 0)
    return grads


def loss_and_grads(layers, X, y):
    logits, acts = forward(layers, X)
    p = sigmoid(logits)
    loss = bce(p, y)
    grads = backward(layers, acts, (p - y) / len(y))
    return loss, grads


class _Adam:
    def __init__(self, layers, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = [[np.zeros_like(p) for p in layer] for layer in layers]
        self.v = [[np.zeros_like(p) for p in layer] for layer in layers]
        self.t = 0

    def step(self, layers, grads):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for layer, g_layer, m_layer, v_layer in zip(layers, grads, self.m, self.v):
            for j in range(2):
                g = g_layer[j]
                m_layer[j] = self.b1 * m_layer[j] + (1 - self.b1) * g
                v_layer[j] = self.b2 * v_layer[j] + (1 - self.b2) * g * g
                layer[j] -= self.lr * (m_layer[j] / c1) / (np.sqrt(v_layer[j] / c2) + self.eps)


class _SGD:
    def __init__(self, layers, lr):
        self.lr = lr

    def step(self, layers, grads):
        for layer, g_layer in zip(layers, grads):
            layer[0] -= self.lr * g_layer[0]
            layer[1] -= self.lr * g_layer[1]


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


class PlausibilityMLP(ClassifierMixin, BaseEstimator):
    """Feed-forward binary classifier with ReLU hidden layers and a sigmoid output.

    Trained by mini-batch descent on mean binary cross-entropy with early
    stopping on a held-out split. When ``groups`` is passed to :meth:`fit`,
    the split holds out whole groups (questions) rather than rows.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
    batch_size, learning_rate, max_epochs, patience : training schedule.
    validation_fraction : float
        Share of groups (or rows) held out for early stopping.
    optimizer : {"adam", "sgd"}
    random_state : int
        Seeds initialization, the split and batch shuffling.
    """

    def __init__(
        self,
        hidden_layer_sizes=(256, 64),
        batch_size=32,
        learning_rate=1e-4,
        max_epochs=50,
        patience=10,
        validation_fraction=0.1,
        optimizer="adam",
        random_state=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.max_epochs = max_epochs
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.optimizer = optimizer
        self.random_state = random_state

    def _init(self, n_features):
        rng = np.random.default_rng(self.random_state)
        sizes = [n_features, *self.hidden_layer_sizes, 1]
        self.layers_ = init_layers(sizes, rng)
        self.n_features_in_ = n_features
        self.classes_ = np.array([0, 1])
        return rng

    def _split(self, n, groups, rng):
        if not self.validation_fraction:
            idx = np.arange(n)
            return idx, idx
        if groups is None:
            perm = rng.permutation(n)
            n_val = max(1, int(round(self.validation_fraction * n)))
            return np.sort(perm[n_val:]), np.sort(perm[:n_val])
        groups = np.asarray(groups)
        uniq = np.array(sorted(set(groups.tolist())))
        if len(uniq) < 2:
            idx = np.arange(n)
            return idx, idx
        perm = rng.permutation(len(uniq))
        n_val = max(1, int(round(self.validation_fraction * len(uniq))))
        held = set(uniq[perm[:n_val]].tolist())
        mask = np.array([g in held for g in groups.tolist()])
        return np.flatnonzero(~mask), np.flatnonzero(mask)

    def fit(self, X, y, groups=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = y.astype(np.float64)
        if not set(np.unique(y)) <= {0.0, 1.0}:
            raise ValueError("labels must be 0 or 1")
        if len(np.unique(y)) < 2:
            raise ValueError("training set needs both positive and negative examples")
        rng = self._init(X.shape[1])
        train_idx, val_idx = self._split(len(y), groups, rng)
        opt = (_Adam if self.optimizer == "adam" else _SGD)(self.layers_, self.learning_rate)

        best = (math.inf, 0, [[w.copy(), b.copy()] for w, b in self.layers_])
        history = []
        for epoch in range(1, self.max_epochs + 1):
            order = train_idx[rng.permutation(len(train_idx))]
            for start in range(0, len(order), self.batch_size):
                batch = order[start : start + self.batch_size]
                loss, grads = loss_and_grads(self.layers_, X[batch], y[batch])
                if not math.isfinite(loss):
                    raise FloatingPointError(f"non-finite loss at epoch {epoch}, batch offset {start}")
                opt.step(self.layers_, grads)
            train_loss = bce(self._proba(X[train_idx]), y[train_idx])
            val_loss = bce(self._proba(X[val_idx]), y[val_idx])
            if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}")
            history.append(EpochRecord(epoch, train_loss, val_loss))
            if val_loss < best[0]:
                best = (val_loss, epoch, [[w.copy(), b.copy()] for w, b in self.layers_])
            elif epoch - best[1] >= self.patience:
                logger.info("early stop at epoch %d (best %d)", epoch, best[1])
                break
        self.layers_ = best[2]
        self.best_epoch_ = best[1]
        self.history_ = history
        self.train_loss_ = bce(self._proba(X[train_idx]), y[train_idx])
        return self

    def _proba(self, X):
        logits, _ = forward(self.layers_, X)
        return sigmoid(logits)

    def decision_function(self, X):
        check_is_fitted(self, "layers_")
        X = self._check_input(X)
        return forward(self.layers_, X)[0]

    def _check_input(self, X):
        X = check_array(X, dtype=np.float64, ensure_2d=False)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def score_samples(self, X):
        """Plausibility in [0, 1] for each row."""
        check_is_fitted(self, "layers_")
        return self._proba(self._check_input(X))

    def predict_proba(self, X):
        p = self.score_samples(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.score_samples(X) >= 0.5).astype(int)

    # -- persistence ---------------------------------------------------

    def to_checkpoint(self, **config) -> dict:
        check_is_fitted(self, "layers_")
        cfg = dict(self.get_params())
        cfg["hidden_layer_sizes"] = list(self.hidden_layer_sizes)
        cfg["n_features"] = int(self.n_features_in_)
        cfg.update(config)
        return {
            "version": CHECKPOINT_VERSION,
            "config": cfg,
            "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in self.layers_],
        }

    def save(self, path, **config):
        # json writes floats with repr(), which round-trips binary64 exactly
        Path(path).write_text(json.dumps(self.to_checkpoint(**config), sort_keys=True) + "\n")

    @classmethod
    def from_checkpoint(cls, doc: dict) -> PlausibilityMLP:
        if doc.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"checkpoint version {doc.get('version')!r} != {CHECKPOINT_VERSION}")
        cfg = dict(doc["config"])
        params = {k: cfg[k] for k in cls._get_param_names() if k in cfg}
        if "hidden_layer_sizes" in params:
            params["hidden_layer_sizes"] = tuple(params["hidden_layer_sizes"])
        model = cls(**params)
        layers = []
        prev = cfg.get("n_features")
        for i, rec in enumerate(doc["layers"]):
            w = np.asarray(rec["w"], dtype=np.float64)
            b = np.asarray(rec["b"], dtype=np.float64)
            if w.ndim != 2 or b.shape != (w.shape[1],) or (prev is not None and w.shape[0] != prev):
                raise CheckpointError(f"layer {i} has inconsistent shapes w={w.shape} b={b.shape}")
            prev = w.shape[1]
            layers.append([w, b])
        if not layers or prev != 1:
            raise CheckpointError("checkpoint must end in a single output unit")
        model.layers_ = layers
        model.n_features_in_ = layers[0][0].shape[0]
        model.classes_ = np.array([0, 1])
        model.checkpoint_config_ = cfg
        return model

    @classmethod
    def load(cls, path, *, embed_dim=None, layers=None) -> PlausibilityMLP:
        text = Path(path).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"checkpoint parse error at byte {exc.pos}: {exc.msg}") from exc
        model = cls.from_checkpoint(doc)
        cfg = model.checkpoint_config_
        if embed_dim is not None and cfg.get("embed_dim") not in (None, embed_dim):
            raise CheckpointError(
                f"checkpoint embedding dimension {cfg['embed_dim']} does not match embedder dimension {embed_dim}"
            )
        if layers is not None and cfg.get("dde_layers") not in (None, layers):
            raise CheckpointError(f"checkpoint DDE layers {cfg['dde_layers']} != configured {layers}")
        return model


def write_history(history, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_loss"])
        for rec in history:
            w.writerow([rec.epoch, repr(rec.train_loss), repr(rec.val_loss)])
