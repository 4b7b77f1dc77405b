"""Deterministic trainable text encoder.

Texts are hashed into character n-gram buckets (FNV-1a over codepoints),
L2-normalized, pushed through a trainable linear projection, and normalized
again. Queries and chunks share one encoder instance. The projection is the
only learned state; everything else is a fixed, seedless transform, so
embeddings are reproducible bit-for-bit across runs and machines.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import CorruptFile, EmptyInput

_MODEL_MAGIC = b"RGEM"
_MODEL_VERSION = 1

DEFAULT_HASH_DIMS = 1 << 18
DEFAULT_NGRAM_RANGE = (3, 5)
DEFAULT_EMBED_DIM = 256
DEFAULT_TEMPERATURE = 0.05


def normalize_text(text: str) -> str:
    """Collapse all whitespace runs to single spaces; case is preserved
    (service names and status codes are case-significant)."""
    return " ".join(text.split())


@dataclass
class EncoderModel:
    """Hashed n-gram encoder with a linear projection.

    ``projection`` has shape (embed_dim, hash_dims), float32 — the same
    layout and precision as the on-disk format, so save/load round-trips are
    bit-exact. Projection math runs in float64 on gathered columns.
    """

    hash_dims: int
    ngram_range: tuple[int, int]
    embed_dim: int
    temperature: float
    projection: np.ndarray

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.projection.shape != (self.embed_dim, self.hash_dims):
            raise ValueError("projection shape must be (embed_dim, hash_dims)")
        if self.projection.dtype != np.float32:
            raise ValueError("projection must be float32")

    @classmethod
    def initialize(
        cls,
        hash_dims: int = DEFAULT_HASH_DIMS,
        ngram_range: tuple[int, int] = DEFAULT_NGRAM_RANGE,
        embed_dim: int = DEFAULT_EMBED_DIM,
        temperature: float = DEFAULT_TEMPERATURE,
        seed: int = 0,
    ) -> "EncoderModel":
        rng = np.random.default_rng(seed)
        scale = np.float32(1.0 / np.sqrt(embed_dim))
        weights = rng.standard_normal((embed_dim, hash_dims), dtype=np.float32) * scale
        return cls(
            hash_dims=hash_dims,
            ngram_range=tuple(ngram_range),
            embed_dim=embed_dim,
            temperature=temperature,
            projection=weights,
        )

    def clone(self) -> "EncoderModel":
        return replace(self, projection=self.projection.copy())


def featurize(text: str, ngram_range: tuple[int, int], hash_dims: int) -> tuple[np.ndarray, np.ndarray]:
    """Sparse hashed-n-gram features: (sorted unique bucket ids, unit-norm counts)."""
    normalized = normalize_text(text)
    if not normalized:
        raise EmptyInput("text is empty after normalization")
    codes = np.frombuffer(normalized.encode("utf-32-le"), dtype=np.uint32).astype(np.uint64)
    bucket_ids = _kernels.ngram_bucket_ids(codes, ngram_range[0], ngram_range[1], hash_dims)
    idx, counts = np.unique(bucket_ids, return_counts=True)
    values = counts.astype(np.float64)
    values /= np.linalg.norm(values)
    return idx, values


class Featurizer:
    """Caches sparse features per text; features depend only on model config,
    never on the projection, so one cache serves a whole training run."""

    def __init__(self, ngram_range: tuple[int, int], hash_dims: int):
        self.ngram_range = tuple(ngram_range)
        self.hash_dims = hash_dims
        self._cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    @classmethod
    def for_model(cls, model: EncoderModel) -> "Featurizer":
        return cls(model.ngram_range, model.hash_dims)

    def features(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        hit = self._cache.get(text)
        if hit is None:
            hit = featurize(text, self.ngram_range, self.hash_dims)
            self._cache[text] = hit
        return hit

    def csr(self, texts: list[str]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR-encode the feature rows of ``texts`` (indptr, indices, values)."""
        indptr = np.zeros(len(texts) + 1, dtype=np.int64)
        idx_parts, val_parts = [], []
        for t, text in enumerate(texts):
            idx, val = self.features(text)
            idx_parts.append(idx)
            val_parts.append(val)
            indptr[t + 1] = indptr[t] + idx.shape[0]
        indices = np.concatenate(idx_parts) if idx_parts else np.empty(0, dtype=np.int64)
        values = np.concatenate(val_parts) if val_parts else np.empty(0, dtype=np.float64)
        return indptr, indices, values


def project_features(model: EncoderModel, indptr, indices, values) -> np.ndarray:
    """Raw (pre-normalization) projections for CSR feature rows, float64."""
    return _kernels.project_rows(model.projection, indptr, indices, values)


def encode_texts(
    model: EncoderModel, texts: list[str], featurizer: Featurizer | None = None
) -> np.ndarray:
    """Unit-norm embeddings for ``texts``, shape (len(texts), embed_dim)."""
    featurizer = featurizer or Featurizer.for_model(model)
    indptr, indices, values = featurizer.csr(texts)
    raw = project_features(model, indptr, indices, values)
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise EmptyInput("projection collapsed a text to the zero vector")
    return raw / norms


def embed(model: EncoderModel, text: str) -> np.ndarray:
    """Unit-norm embedding of one text. Deterministic for fixed weights."""
    return encode_texts(model, [text])[0]


def similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two unit vectors (their inner product)."""
    return float(np.dot(u, v))


# --- persistence ---------------------------------------------------------------

_HEADER = struct.Struct("<4sIIIIId")  # magic, version, F, nmin, nmax, d, tau


def save_model(model: EncoderModel, path: str | Path) -> None:
    """Write the binary model container (little-endian float32 rows)."""
    header = _HEADER.pack(
        _MODEL_MAGIC,
        _MODEL_VERSION,
        model.hash_dims,
        model.ngram_range[0],
        model.ngram_range[1],
        model.embed_dim,
        model.temperature,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(model.projection, dtype="<f4").tobytes())


def load_model(path: str | Path) -> EncoderModel:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise CorruptFile(f"{path}: truncated model header")
    magic, version, hash_dims, nmin, nmax, embed_dim, tau = _HEADER.unpack_from(blob)
    if magic != _MODEL_MAGIC:
        raise CorruptFile(f"{path}: bad magic {magic!r}")
    if version != _MODEL_VERSION:
        raise CorruptFile(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 4 * embed_dim * hash_dims
    if len(blob) != expected:
        raise CorruptFile(f"{path}: expected {expected} bytes, found {len(blob)}")
    weights = (
        np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
        .reshape(embed_dim, hash_dims)
        .astype(np.float32)
    )
    return EncoderModel(
        hash_dims=hash_dims,
        ngram_range=(nmin, nmax),
        embed_dim=embed_dim,
        temperature=tau,
        projection=weights,
    )


class RemoteEncoder:
    """Adapter for an external embeddings service (JSON over HTTP).

    Request: {"model": ..., "input": [texts]}; response: {"data":
    [{"embedding": [...]}, ...]} in input order. Returned vectors are
    re-normalized so downstream cosine math holds regardless of the service.
    """

    def __init__(self, url: str, model: str, timeout: float = 30.0, api_key: str | None = None):
        self.url = url
        self.model = model
        self.timeout = timeout
        self.api_key = api_key

    def embed_many(self, texts: list[str]) -> np.ndarray:
        import httpx

        from .errors import BackendUnavailable

        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = httpx.post(
                self.url,
                json={"model": self.model, "input": list(texts)},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            payload = resp.json()
            rows = [item["embedding"] for item in payload["data"]]
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"embedding service error: {exc}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendUnavailable(f"malformed embeddings response: {exc}") from exc
        matrix = np.asarray(rows, dtype=np.float64)
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise BackendUnavailable("embedding service returned a zero vector")
        return matrix / norms

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]
