"""Dense post embeddings through a pluggable provider.

Three provider kinds exist: ``http`` (an OpenAI-style ``/embeddings``
endpoint), ``synthetic`` (hash-seeded unit vectors) and ``planted`` (one-hot
topic directions plus noise, the topic read off the text by lexicon).
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import httpx
import numpy as np

from . import _http
from .artifacts import load_matrix, save_matrix
from .corpus import Corpus
from .errors import DimensionMismatch, EmbeddingError
from .synth import TOPIC_LEXICONS, topic_of

log = logging.getLogger(__name__)

PRESET_DIMENSIONS = {"small": 384, "medium": 768, "large": 1024}
PROVIDER_KINDS = ("http", "synthetic", "planted")


@dataclass(frozen=True)
class EmbeddingProviderSpec:
    name: str = "synthetic"
    dimension: int = 32
    kind: str = "synthetic"
    endpoint: Optional[str] = None
    model_id: Optional[str] = None
    batch_size: int = 64
    seed: int = 0
    separation: float = 10.0
    noise: float = 1.0
    max_in_flight: int = 4
    max_retries: int = 3
    api_key_env: str = _http.API_KEY_ENV
    timeout: float = 60.0
    lexicons: tuple[tuple[str, ...], ...] = field(default=TOPIC_LEXICONS, repr=False)

    def __post_init__(self):
        if self.kind not in PROVIDER_KINDS:
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if int(self.dimension) <= 0:
            raise ValueError("dimension must be positive")
        if int(self.batch_size) <= 0:
            raise ValueError("batch_size must be positive")
        if self.kind == "http" and not (self.endpoint and self.model_id):
            raise ValueError("http provider needs endpoint and model_id")
        if self.kind == "planted" and self.separation <= 0:
            raise ValueError("separation must be positive")
        if self.kind == "planted" and self.noise < 0:
            raise ValueError("noise must be non-negative")

    @classmethod
    def preset(cls, size: str, **kw) -> "EmbeddingProviderSpec":
        return cls(name=size, dimension=PRESET_DIMENSIONS[size], **kw)

    def identity(self) -> dict:
        d = asdict(self)
        d["lexicons"] = [list(x) for x in self.lexicons]
        return d


@dataclass
class EmbeddingMatrix:
    rows: np.ndarray  # float32, n x d
    post_ids: list[str]
    provider: EmbeddingProviderSpec

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[0] != len(self.post_ids):
            raise EmbeddingError("row count does not match id count")
        if self.rows.shape[1] != self.provider.dimension:
            raise DimensionMismatch(
                f"matrix has {self.rows.shape[1]} columns, provider says {self.provider.dimension}"
            )
        if not np.all(np.isfinite(self.rows)):
            raise EmbeddingError("embedding matrix contains non-finite values")

    @property
    def shape(self):
        return self.rows.shape

    def save(self, stem):
        return save_matrix(self.rows, stem, provider=self.provider.identity(), post_ids=self.post_ids)

    @classmethod
    def load(cls, stem) -> "EmbeddingMatrix":
        rows, meta = load_matrix(stem)
        p = dict(meta["provider"])
        p["lexicons"] = tuple(tuple(x) for x in p.get("lexicons", TOPIC_LEXICONS))
        return cls(rows, list(meta["post_ids"]), EmbeddingProviderSpec(**p))


def stable_hash64(text: str, seed: int) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(int(seed).to_bytes(8, "little", signed=True))
    h.update(text.encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def synthetic_embed(text: str, dimension: int, seed: int) -> np.ndarray:
    if dimension <= 0:
        raise ValueError("dimension must be positive")
    rng = np.random.default_rng(stable_hash64(text, seed))
    v = rng.standard_normal(dimension)
    norm = np.linalg.norm(v)
    return v / norm


def topic_planted_embed(text: str, topic_label: int, dimension: int, separation: float,
                        noise: float, seed: int) -> np.ndarray:
    if not 0 <= topic_label < dimension:
        raise ValueError(f"topic_label {topic_label} out of range for dimension {dimension}")
    if separation <= 0 or noise < 0:
        raise ValueError("need separation > 0 and noise >= 0")
    v = np.zeros(dimension)
    v[topic_label] = separation
    if noise > 0:
        rng = np.random.default_rng(stable_hash64("planted\x00" + text, seed))
        v += noise * rng.standard_normal(dimension)
    return v


def _embed_local(texts: Sequence[str], p: EmbeddingProviderSpec) -> np.ndarray:
    if p.kind == "synthetic":
        rows = [synthetic_embed(t, p.dimension, p.seed) for t in texts]
    else:
        rows = [
            topic_planted_embed(t, topic_of(t, p.lexicons), p.dimension, p.separation, p.noise, p.seed)
            for t in texts
        ]
    return np.asarray(rows, dtype=np.float64).reshape(len(texts), p.dimension)


def _embed_http(texts: Sequence[str], p: EmbeddingProviderSpec, client: Optional[httpx.Client],
                sleep=None) -> np.ndarray:
    batches = [texts[i:i + p.batch_size] for i in range(0, len(texts), p.batch_size)]
    owns = client is None
    client = client or _http.make_http_client(timeout=p.timeout)
    headers = _http.auth_headers(p.api_key_env)
    extra = {} if sleep is None else {"sleep": sleep}

    def fetch(idx: int) -> np.ndarray:
        batch = batches[idx]
        try:
            body, _ = _http.post_json(
                client, p.endpoint, {"model": p.model_id, "input": list(batch)}, headers,
                max_retries=p.max_retries, **extra,
            )
        except Exception as exc:
            raise EmbeddingError(f"embedding batch {idx} failed: {exc}") from exc
        try:
            vecs = [item["embedding"] for item in body["data"]]
        except (KeyError, TypeError) as exc:
            raise EmbeddingError(f"embedding batch {idx}: malformed response") from exc
        if len(vecs) != len(batch):
            raise EmbeddingError(f"embedding batch {idx}: got {len(vecs)} rows for {len(batch)} texts")
        for v in vecs:
            if len(v) != p.dimension:
                raise DimensionMismatch(
                    f"embedding batch {idx}: provider returned {len(v)}-dim row, expected {p.dimension}"
                )
        return np.asarray(vecs, dtype=np.float64)

    try:
        with ThreadPoolExecutor(max_workers=max(1, p.max_in_flight)) as pool:
            # map() yields in submission order, so rows come back in corpus order
            parts = list(pool.map(fetch, range(len(batches))))
    finally:
        if owns:
            client.close()
    if not parts:
        return np.zeros((0, p.dimension))
    return np.vstack(parts)


def embed_corpus(c: Corpus, p: EmbeddingProviderSpec, client: Optional[httpx.Client] = None,
                 sleep=None) -> EmbeddingMatrix:
    """Embed every post's ``clean_text``; rows are aligned with corpus order."""
    texts = [post.clean_text for post in c.posts]
    for post in c.posts:
        if not post.clean_text:
            raise EmbeddingError(f"post {post.id!r} has empty clean_text")
    if p.kind == "http":
        rows = _embed_http(texts, p, client, sleep=sleep)
    else:
        rows = _embed_local(texts, p)
    if not np.all(np.isfinite(rows)):
        bad = int(np.argwhere(~np.isfinite(rows))[0, 0])
        raise EmbeddingError(f"non-finite embedding for post {c.posts[bad].id!r}")
    return EmbeddingMatrix(rows.astype(np.float32), c.ids, p)
