"""Embedding backends and the on-disk embedding cache.

Backends expose ``model_id`` and ``embed(documents) -> ndarray (n, dim)``.
:class:`LocalHashEmbedder` is deterministic and offline; :class:`RemoteEmbedder`
speaks a small JSON protocol::

    POST <endpoint>   {"model": "<id>", "task": "<task>", "texts": [...]}
    200               {"embeddings": [[...], [...]]}
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence, TextIO

import httpx
import numpy as np

from .errors import AuthError, BackendError, ConfigurationError, InputError, NumericError, ProtocolError

log = logging.getLogger(__name__)

API_KEY_ENV = "CHATTER_ATLAS_API_KEY"

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & _MASK64
    return h


class Embedder(Protocol):
    model_id: str

    def embed(self, documents: Sequence[str]) -> np.ndarray: ...


@dataclass(frozen=True)
class LocalEmbedderConfig:
    dim: int = 256
    ngram: int = 3

    def __post_init__(self):
        if self.dim < 2:
            raise ConfigurationError("dim must be >= 2")
        if self.ngram < 1:
            raise ConfigurationError("ngram must be >= 1")


def _char_ngrams(document: str, n: int) -> Counter:
    if len(document) < n:
        # too short for a full window: the whole text is the only gram
        return Counter([document])
    return Counter(document[i : i + n] for i in range(len(document) - n + 1))


def local_hash_embed(document: str, config: LocalEmbedderConfig = LocalEmbedderConfig()) -> np.ndarray:
    """Signed feature hashing of character n-grams, L2-normalized.

    Each n-gram is hashed as UTF-8 with FNV-1a 64; the bucket is
    ``hash % dim`` and bit 63 selects the sign.
    """
    if not document:
        raise InputError("cannot embed an empty document")
    acc = np.zeros(config.dim, dtype=np.float64)
    for gram, count in sorted(_char_ngrams(document, config.ngram).items()):
        h = fnv1a64(gram.encode("utf-8"))
        acc[h % config.dim] += -count if h >> 63 else count
    norm = math.sqrt(float(np.dot(acc, acc)))
    if norm == 0.0:
        raise NumericError("hashed n-gram counts cancelled to zero")
    return acc / norm


class LocalHashEmbedder:
    def __init__(self, config: LocalEmbedderConfig = LocalEmbedderConfig()):
        self.config = config
        self.model_id = f"local-fnv1a-d{config.dim}-n{config.ngram}"

    def embed(self, documents: Sequence[str]) -> np.ndarray:
        if not documents:
            return np.zeros((0, self.config.dim))
        return np.stack([local_hash_embed(d, self.config) for d in documents])


@dataclass(frozen=True)
class RemoteEmbedderConfig:
    endpoint: str
    model_id: str
    task: str = "SEMANTIC_SIMILARITY"
    batch_size: int = 16
    max_chars: int = 16000
    retries: int = 3
    backoff_base: float = 0.5
    timeout: float = 30.0
    max_in_flight: int = 4

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.retries < 0:
            raise ConfigurationError("retries must be >= 0")
        if self.max_chars < 1:
            raise ConfigurationError("max_chars must be >= 1")
        if self.max_in_flight < 1:
            raise ConfigurationError("max_in_flight must be >= 1")


class RemoteEmbedder:
    """Client for the JSON embedding protocol with batching and retries.

    Retries on 429, 5xx and transport errors, sleeping
    ``backoff_base * 2**attempt`` between tries. Other 4xx responses raise
    :class:`AuthError` immediately.
    """

    def __init__(
        self,
        config: RemoteEmbedderConfig,
        api_key: str | None = None,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self.model_id = config.model_id
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleep
        self.truncated = 0
        self.requests = 0

    def _post(self, texts: list[str]) -> list[list[float]]:
        cfg = self.config
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        body = {"model": cfg.model_id, "task": cfg.task, "texts": texts}
        last = "no attempt made"
        for attempt in range(cfg.retries + 1):
            if attempt:
                self._sleep(cfg.backoff_base * 2 ** (attempt - 1))
            self.requests += 1
            try:
                resp = self._client.post(cfg.endpoint, json=body, headers=headers)
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise AuthError(f"embedding request rejected: HTTP {resp.status_code}", resp.status_code)
            try:
                vectors = resp.json()["embeddings"]
            except (ValueError, KeyError, TypeError):
                raise ProtocolError("response lacks an 'embeddings' array") from None
            if not isinstance(vectors, list) or len(vectors) != len(texts):
                got = len(vectors) if isinstance(vectors, list) else type(vectors).__name__
                raise ProtocolError(f"sent {len(texts)} texts, received {got} embeddings")
            return vectors
        raise BackendError(f"embedding request failed after {cfg.retries + 1} attempt(s): {last}")

    def embed(self, documents: Sequence[str]) -> np.ndarray:
        cfg = self.config
        texts = []
        for doc in documents:
            if len(doc) > cfg.max_chars:
                self.truncated += 1
                doc = doc[: cfg.max_chars]
            texts.append(doc)
        batches = [texts[i : i + cfg.batch_size] for i in range(0, len(texts), cfg.batch_size)]
        if len(batches) <= 1 or cfg.max_in_flight == 1:
            results = [self._post(b) for b in batches]
        else:
            with ThreadPoolExecutor(max_workers=cfg.max_in_flight) as pool:
                results = list(pool.map(self._post, batches))
        rows = [row for batch in results for row in batch]
        try:
            out = np.array(rows, dtype=np.float64)
        except (ValueError, TypeError):
            raise ProtocolError("embeddings have inconsistent dimensions") from None
        if rows and (out.ndim != 2 or not np.isfinite(out).all()):
            raise ProtocolError("embeddings must be finite vectors of one dimension")
        return out


def remote_embed_batch(config: RemoteEmbedderConfig, documents: Sequence[str], **kwargs) -> np.ndarray:
    return RemoteEmbedder(config, **kwargs).embed(documents)


def cache_key(model_id: str, document: str) -> str:
    data = model_id.encode("utf-8") + b"\x00" + document.encode("utf-8")
    return f"{fnv1a64(data):016x}"


class EmbeddingCache:
    """Append-only JSONL store of embeddings under ``directory``.

    Unreadable lines are dropped with a warning; the file is rewritten
    cleanly on the next store.
    """

    FILENAME = "embeddings.jsonl"

    def __init__(self, directory: str | Path):
        self.path = Path(directory) / self.FILENAME
        self._entries: dict[str, tuple[str, np.ndarray]] = {}
        self._dirty = False
        self._lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        bad = 0
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    values = np.array(rec["values"], dtype=np.float64)
                    if values.ndim != 1 or len(values) != rec["dim"] or not np.isfinite(values).all():
                        raise ValueError("dimension mismatch")
                    self._entries[rec["key"]] = (rec["model"], values)
                except (ValueError, KeyError, TypeError):
                    bad += 1
        if bad:
            self._dirty = True
            log.warning("embedding cache %s: %d corrupted record(s) ignored", self.path, bad)

    def key_lock(self, key: str) -> threading.Lock:
        with self._lock:
            return self._key_locks.setdefault(key, threading.Lock())

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, model_id: str, document: str) -> np.ndarray | None:
        entry = self._entries.get(cache_key(model_id, document))
        if entry is None or entry[0] != model_id:
            return None
        return entry[1].copy()

    def put(self, model_id: str, document: str, vector: np.ndarray) -> None:
        key = cache_key(model_id, document)
        vector = np.asarray(vector, dtype=np.float64)
        with self._lock:
            self._entries[key] = (model_id, vector.copy())
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if self._dirty:
                with open(self.path, "w", encoding="utf-8") as fh:
                    for k, (model, vals) in self._entries.items():
                        fh.write(_cache_line(k, model, vals))
                self._dirty = False
            else:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(_cache_line(key, model_id, vector))


def _cache_line(key: str, model_id: str, values: np.ndarray) -> str:
    rec = {"key": key, "model": model_id, "dim": len(values), "values": values.tolist()}
    return json.dumps(rec) + "\n"


def cache_fetch_or_embed(cache: EmbeddingCache, backend: Embedder, document: str) -> np.ndarray:
    with cache.key_lock(cache_key(backend.model_id, document)):
        hit = cache.get(backend.model_id, document)
        if hit is not None:
            return hit
        vector = backend.embed([document])[0]
        cache.put(backend.model_id, document, vector)
        return vector


def embed_documents(
    backend: Embedder, documents: Sequence[str], cache: EmbeddingCache | None = None
) -> np.ndarray:
    """Embed ``documents`` in order, consulting ``cache`` first when given.

    Cache misses go to the backend in a single call so remote batching
    still applies.
    """
    for i, doc in enumerate(documents):
        if not doc:
            raise InputError(f"document {i} is empty")
    if cache is None:
        out = backend.embed(list(documents))
    else:
        rows: list[np.ndarray | None] = [cache.get(backend.model_id, d) for d in documents]
        missing = [i for i, r in enumerate(rows) if r is None]
        if missing:
            fresh = backend.embed([documents[i] for i in missing])
            if len(fresh) != len(missing):
                raise ProtocolError(f"backend returned {len(fresh)} vectors for {len(missing)} documents")
            for i, vec in zip(missing, fresh):
                cache.put(backend.model_id, documents[i], vec)
                rows[i] = np.asarray(vec, dtype=np.float64)
        out = np.stack(rows) if rows else np.zeros((0, 0))
    out = np.asarray(out, dtype=np.float64)
    if len(out) != len(documents):
        raise ProtocolError(f"backend returned {len(out)} vectors for {len(documents)} documents")
    if len(documents) and out.ndim != 2:
        raise ProtocolError("vectors do not share one dimension")
    return out


def write_embeddings(users: Iterable[str], vectors: np.ndarray, dest: TextIO, model_id: str) -> None:
    for user, vec in zip(users, vectors):
        rec = {"user": user, "model": model_id, "dim": len(vec), "values": vec.tolist()}
        dest.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_embeddings(lines: Iterable[str]) -> tuple[list[str], np.ndarray]:
    users, rows = [], []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            users.append(rec["user"])
            rows.append(rec["values"])
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"bad embedding record on line {lineno}: {exc}") from None
    try:
        vectors = np.array(rows, dtype=np.float64)
    except ValueError:
        raise InputError("embedding records do not share one dimension") from None
    return users, vectors
