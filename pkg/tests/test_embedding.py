import httpx
import numpy as np
import pytest

from hyperrag.embedding import CachedEmbedder, HashingEmbedder, RemoteEmbedder, make_embedder
from hyperrag.exceptions import BackendError, TransportError


def test_unit_norm_and_determinism():
    e = HashingEmbedder(64)
    v = e.embed("Bruce Seth Green")
    assert abs(np.linalg.norm(v) - 1.0) <= 1e-6
    assert np.array_equal(v, e.embed("Bruce Seth Green"))


def test_distinct_texts_differ():
    e = HashingEmbedder(64)
    assert float(e.embed("a") @ e.embed("b")) < 0.99


def test_batch_contract():
    e = HashingEmbedder(32)
    assert e.embed_batch([]) == []
    texts = [f"text number {i}" for i in range(1000)]
    out = e.embed_batch(texts)
    assert len(out) == 1000
    assert np.array_equal(out[417], e.embed(texts[417]))
    with pytest.raises(ValueError):
        e.embed("")


def test_cache_avoids_backend_calls(tmp_path):
    inner = HashingEmbedder(16)
    cached = CachedEmbedder(inner, tmp_path / "cache.json")
    cached.embed_batch(["x", "y"])
    cached.embed_batch(["y", "x"])
    assert inner.backend_calls == 1
    cached.save()
    again = CachedEmbedder(HashingEmbedder(16), tmp_path / "cache.json")
    assert len(again) == 2
    assert np.array_equal(again.embed("x"), cached.embed("x"))
    assert again.inner.backend_calls == 0


def test_cache_ignores_other_backends(tmp_path):
    CachedEmbedder(HashingEmbedder(16), tmp_path / "c.json").embed("x")
    c = CachedEmbedder(HashingEmbedder(16), tmp_path / "c.json")
    c.embed("x")
    c.save()
    assert len(CachedEmbedder(HashingEmbedder(8), tmp_path / "c.json")) == 0


def _fake_post(responses):
    calls = []

    def post(url, json=None, headers=None, timeout=None):
        calls.append(json)
        item = responses.pop(0)
        if isinstance(item, Exception):
            raise item
        req = httpx.Request("POST", url)
        return httpx.Response(200, json=item, request=req)

    return post, calls


def test_remote_embedder_retries_then_succeeds(monkeypatch):
    post, calls = _fake_post([httpx.ConnectError("down"), {"data": [{"embedding": [3.0, 4.0]}]}])
    monkeypatch.setattr(httpx, "post", post)
    e = RemoteEmbedder("http://x/embeddings", "m", dimension=2, backoff=0.0)
    assert np.allclose(e.embed("hi"), [0.6, 0.8])
    assert len(calls) == 2 and calls[0]["input"] == ["hi"]


def test_remote_embedder_gives_up(monkeypatch):
    post, _ = _fake_post([httpx.ConnectError("down")] * 2)
    monkeypatch.setattr(httpx, "post", post)
    with pytest.raises(TransportError):
        RemoteEmbedder("http://x", "m", dimension=2, retries=2, backoff=0.0).embed("hi")


def test_remote_dimension_mismatch(monkeypatch):
    post, _ = _fake_post([{"data": [{"embedding": [1.0, 0.0, 0.0]}]}])
    monkeypatch.setattr(httpx, "post", post)
    with pytest.raises(BackendError, match="shape"):
        RemoteEmbedder("http://x", "m", dimension=2).embed("hi")


def test_factory():
    assert make_embedder("hashing", dimension=8).dimension == 8
    with pytest.raises(ValueError):
        make_embedder("nope")
