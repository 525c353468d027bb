"""Embedding acquisition: endpoint clients, the on-disk vector cache, and
the batching wrapper that turns texts into a normalized EmbeddingMatrix.

The wire protocol is the OpenAI-embeddings-compatible shape. ``mock://``
URLs dispatch to deterministic in-process encoders so the whole pipeline
runs offline:

    mock://hash?dim=D   pseudo-random unit direction from a content hash
    mock://bow?dim=D    hashed bag-of-words; token overlap -> high cosine
    mock://fail         always raises (for retry/abort paths)

Raw (pre-normalization) vectors are cached keyed by (encoder, content
hash); normalization is applied at load.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from urllib.parse import parse_qs, urlparse

import numpy as np
import requests

from .errors import ConfigError, ContractError, EndpointError
from .geometry import EmbeddingMatrix, l2_normalize
from .tokenizers import word_tokens


@dataclass(frozen=True)
class EncoderEndpoint:
    encoder_id: str
    url: str
    batch_size: int = 32
    retries: int = 3
    backoff_s: float = 0.5
    timeout_s: float = 60.0
    auth_env: str | None = None


def content_key(encoder_id: str, text: str) -> str:
    digest = hashlib.sha256(f"{encoder_id}\0{text}".encode("utf-8")).hexdigest()
    return digest


def _mock_hash_vector(encoder_id: str, text: str, dim: int) -> np.ndarray:
    seed = int.from_bytes(
        hashlib.sha256(f"{encoder_id}\0{text}".encode("utf-8")).digest()[:8], "big")
    return np.random.default_rng(seed).standard_normal(dim)


def _mock_bow_vector(text: str, dim: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=np.float64)
    for tok in word_tokens(text):
        digest = hashlib.sha256(tok.encode("utf-8")).digest()
        idx = int.from_bytes(digest[:8], "big") % dim
        sign = 1.0 if digest[8] & 1 else -1.0
        vec[idx] += sign
    return vec


class EncoderClient:
    """One embedding endpoint; counts every upstream call it makes."""

    def __init__(self, endpoint: EncoderEndpoint):
        self.endpoint = endpoint
        self.call_count = 0
        parsed = urlparse(endpoint.url)
        self._scheme = parsed.scheme
        self._mock_kind = parsed.netloc if parsed.scheme == "mock" else None
        self._mock_params = {k: v[-1] for k, v in parse_qs(parsed.query).items()}

    @property
    def encoder_id(self) -> str:
        return self.endpoint.encoder_id

    def _embed_once(self, texts: Sequence[str]) -> list[list[float]]:
        self.call_count += 1
        if self._scheme == "mock":
            return self._embed_mock(texts)
        return self._embed_http(texts)

    def _embed_mock(self, texts: Sequence[str]) -> list[list[float]]:
        kind = self._mock_kind
        if kind == "fail":
            raise EndpointError(f"mock encoder {self.encoder_id!r} configured to fail")
        dim = int(self._mock_params.get("dim", 64))
        if kind == "hash":
            return [_mock_hash_vector(self.encoder_id, t, dim).tolist() for t in texts]
        if kind == "bow":
            return [_mock_bow_vector(t, dim).tolist() for t in texts]
        raise ConfigError(f"unknown mock encoder kind {kind!r}")

    def _embed_http(self, texts: Sequence[str]) -> list[list[float]]:
        headers = {"Content-Type": "application/json"}
        if self.endpoint.auth_env:
            token = os.environ.get(self.endpoint.auth_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        resp = requests.post(
            self.endpoint.url,
            json={"model": self.encoder_id, "input": list(texts)},
            headers=headers,
            timeout=self.endpoint.timeout_s,
        )
        if resp.status_code != 200:
            raise EndpointError(
                f"encoder {self.encoder_id!r} returned HTTP {resp.status_code}")
        payload = resp.json()
        data = payload.get("data")
        if not isinstance(data, list) or len(data) != len(texts):
            raise EndpointError(
                f"encoder {self.encoder_id!r} returned {0 if not data else len(data)} "
                f"embeddings for {len(texts)} inputs")
        return [row["embedding"] for row in data]

    def embed_batch(self, texts: Sequence[str]) -> list[list[float]]:
        """Embed one batch, retrying with exponential backoff."""
        attempts = self.endpoint.retries + 1
        last: Exception | None = None
        for attempt in range(attempts):
            try:
                return self._embed_once(texts)
            except (EndpointError, requests.RequestException) as exc:
                last = exc
                if attempt + 1 < attempts and self.endpoint.backoff_s > 0:
                    time.sleep(self.endpoint.backoff_s * (2 ** attempt))
        raise EndpointError(
            f"encoder {self.encoder_id!r} failed after {attempts} attempts "
            f"on a batch of {len(texts)}: {last}")


class EmbeddingCache:
    """Content-addressed raw-vector cache.

    Layout: ``vectors.bin`` holds float64 rows back to back; the JSON-Lines
    manifest records (key, encoder_id, dim, offset). Writes are serialized;
    duplicate keys are benign (values are deterministic, last writer wins).
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.vectors_path = self.root / "vectors.bin"
        self.manifest_path = self.root / "manifest.jsonl"
        self._lock = threading.Lock()
        self._index: dict[str, tuple[int, int]] = {}
        if self.manifest_path.exists():
            with open(self.manifest_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    entry = json.loads(line)
                    self._index[entry["key"]] = (entry["offset"], entry["dim"])

    def __contains__(self, key: str) -> bool:
        return key in self._index

    def get(self, key: str) -> np.ndarray | None:
        with self._lock:
            hit = self._index.get(key)
        if hit is None:
            return None
        offset, dim = hit
        with open(self.vectors_path, "rb") as fh:
            fh.seek(offset)
            buf = fh.read(dim * 8)
        return np.frombuffer(buf, dtype=np.float64).copy()

    def put(self, key: str, encoder_id: str, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=np.float64).ravel()
        with self._lock:
            with open(self.vectors_path, "ab") as fh:
                offset = fh.tell()
                fh.write(vector.tobytes())
            entry = {"key": key, "encoder_id": encoder_id,
                     "dim": int(vector.size), "offset": offset}
            with open(self.manifest_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
            self._index[key] = (offset, int(vector.size))


def embed_texts(ids: Sequence[str], texts: Sequence[str], client: EncoderClient,
                cache: EmbeddingCache | None = None) -> EmbeddingMatrix:
    """One normalized vector per text, in input order.

    Cached texts cost zero endpoint calls; misses are batched by the
    endpoint's batch size. A dimension mismatch across rows is fatal.
    """
    if len(ids) != len(texts):
        raise ContractError(f"{len(ids)} ids for {len(texts)} texts")
    if len(texts) == 0:
        raise ContractError("cannot embed an empty text list")

    encoder_id = client.encoder_id
    keys = [content_key(encoder_id, t) for t in texts]
    rows: list[np.ndarray | None] = [None] * len(texts)

    miss_idx: list[int] = []
    seen_pending: dict[str, int] = {}
    for i, key in enumerate(keys):
        vec = cache.get(key) if cache is not None else None
        if vec is not None:
            rows[i] = vec
        elif key in seen_pending:
            pass  # duplicate text in the same request: fill after fetch
        else:
            seen_pending[key] = i
            miss_idx.append(i)

    bs = client.endpoint.batch_size
    for start in range(0, len(miss_idx), bs):
        chunk = miss_idx[start:start + bs]
        fetched = client.embed_batch([texts[i] for i in chunk])
        for i, vec in zip(chunk, fetched):
            arr = np.asarray(vec, dtype=np.float64)
            rows[i] = arr
            if cache is not None:
                cache.put(keys[i], encoder_id, arr)

    by_key: dict[str, np.ndarray] = {}
    for i, row in enumerate(rows):
        if row is not None:
            by_key[keys[i]] = row
    for i, row in enumerate(rows):
        if row is None:
            rows[i] = by_key[keys[i]]

    dims = {r.size for r in rows}  # type: ignore[union-attr]
    if len(dims) != 1:
        raise EndpointError(
            f"encoder {encoder_id!r} returned inconsistent dimensions {sorted(dims)}")

    matrix = EmbeddingMatrix(encoder_id=encoder_id, ids=tuple(ids),
                             vectors=np.vstack(rows), normalized=False)
    return l2_normalize(matrix)
