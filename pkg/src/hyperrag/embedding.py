"""Text embedders: a hashed char-n-gram mock, a remote client and a cache."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
from pathlib import Path

import numpy as np
from sklearn.feature_extraction.text import HashingVectorizer

from .exceptions import BackendError, TransportError

logger = logging.getLogger(__name__)


class Embedder:
    """Maps text to unit vectors of a fixed dimension."""

    dimension: int
    backend_id: str

    def __init__(self):
        self.backend_calls = 0

    def _embed_many(self, texts: list[str]) -> np.ndarray:
        raise NotImplementedError

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts) -> list[np.ndarray]:
        texts = list(texts)
        if not texts:
            return []
        for t in texts:
            if not isinstance(t, str) or not t:
                raise ValueError("cannot embed empty text")
        self.backend_calls += 1
        mat = np.asarray(self._embed_many(texts), dtype=np.float64)
        if mat.shape != (len(texts), self.dimension):
            raise BackendError(f"backend returned shape {mat.shape}, expected ({len(texts)}, {self.dimension})")
        return [_unit(row) for row in mat]


def _unit(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        raise BackendError("backend returned a zero vector")
    return v / n


class HashingEmbedder(Embedder):
    """Deterministic offline embedder over hashed character n-grams.

    Texts whose hashed features cancel to zero fall back to a one-hot
    vector chosen by a content hash.
    """

    def __init__(self, dimension: int = 64, ngram_range=(2, 4)):
        super().__init__()
        self.dimension = dimension
        self.ngram_range = tuple(ngram_range)
        self.backend_id = f"hashing-char{self.ngram_range[0]}-{self.ngram_range[1]}-d{dimension}"
        self._vec = HashingVectorizer(
            analyzer="char_wb",
            ngram_range=self.ngram_range,
            n_features=dimension,
            alternate_sign=True,
            norm=None,
            lowercase=True,
        )

    def _embed_many(self, texts):
        mat = self._vec.transform(texts).toarray().astype(np.float64)
        for i, row in enumerate(mat):
            if not row.any():
                h = int.from_bytes(hashlib.sha256(texts[i].encode()).digest()[:4], "big")
                row[h % self.dimension] = 1.0
        return mat


class RemoteEmbedder(Embedder):
    """Client for an OpenAI-compatible ``/embeddings`` endpoint."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        dimension: int,
        api_key_env: str = "HYPERRAG_EMBED_API_KEY",
        timeout: float = 30.0,
        max_in_flight: int = 4,
        retries: int = 3,
        backoff: float = 0.5,
    ):
        super().__init__()
        self.endpoint = endpoint
        self.model = model
        self.dimension = dimension
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.backend_id = f"remote:{model}"
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def _post(self, texts):
        import httpx

        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        with self._slots:
            try:
                resp = httpx.post(
                    self.endpoint,
                    json={"input": texts, "model": self.model},
                    headers=headers,
                    timeout=self.timeout,
                )
                resp.raise_for_status()
            except httpx.HTTPError as exc:
                raise TransportError(str(exc)) from exc
        return [item["embedding"] for item in resp.json()["data"]]

    def _embed_many(self, texts):
        import time

        for attempt in range(1, self.retries + 1):
            try:
                return self._post(texts)
            except TransportError:
                if attempt == self.retries:
                    raise
                time.sleep(self.backoff * 2 ** (attempt - 1))


class CachedEmbedder(Embedder):
    """Memoizes another embedder by (backend id, content hash).

    With ``path`` set the cache persists as a JSON file.
    """

    def __init__(self, inner: Embedder, path=None):
        super().__init__()
        self.inner = inner
        self.dimension = inner.dimension
        self.backend_id = inner.backend_id
        self.path = Path(path) if path else None
        self._cache: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()
        if self.path and self.path.exists():
            self._load()

    @property
    def backend_calls(self):
        return self.inner.backend_calls

    @backend_calls.setter
    def backend_calls(self, value):
        pass

    def _key(self, text: str) -> str:
        return self.backend_id + ":" + hashlib.sha256(text.encode("utf-8")).hexdigest()

    def embed_batch(self, texts):
        texts = list(texts)
        with self._lock:
            missing = list(dict.fromkeys(t for t in texts if self._key(t) not in self._cache))
        if missing:
            vecs = self.inner.embed_batch(missing)
            with self._lock:
                for t, v in zip(missing, vecs):
                    self._cache[self._key(t)] = v
        with self._lock:
            return [self._cache[self._key(t)] for t in texts]

    def __len__(self):
        return len(self._cache)

    def _load(self):
        doc = json.loads(self.path.read_text(encoding="utf-8"))
        for k, v in doc.items():
            if k.startswith(self.backend_id + ":"):
                self._cache[k] = np.asarray(v, dtype=np.float64)

    def save(self):
        if not self.path:
            return
        with self._lock:
            doc = {k: v.tolist() for k, v in sorted(self._cache.items())}
        self.path.write_text(json.dumps(doc), encoding="utf-8")


def make_embedder(kind: str = "hashing", *, dimension: int = 64, cache_path=None, **kw) -> Embedder:
    if kind == "hashing":
        inner = HashingEmbedder(dimension)
    elif kind == "remote":
        inner = RemoteEmbedder(dimension=dimension, **kw)
    else:
        raise ValueError(f"unknown embedder kind {kind!r}")
    return CachedEmbedder(inner, cache_path)
