"""Dense cosine vector index: exact search plus a coarse inverted-list mode.

The index is an immutable snapshot; ``insert`` returns a new index, which
makes the reader/writer story trivial (readers keep searching the snapshot
they hold). Exact mode scans all rows; coarse mode trains spherical k-means
centroids and probes only the nearest ``nprobe`` lists.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CorruptFile, DimensionMismatch, DuplicateId, ZeroVector

MODE_EXACT = "exact"
MODE_COARSE = "coarse"

_INDEX_MAGIC = b"RGIX"
_INDEX_VERSION = 1


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms < 1e-12):
        raise ZeroVector("cannot cosine-normalize a zero vector")
    return (matrix / norms).astype(np.float32)


def _spherical_kmeans(
    rows: np.ndarray, nlist: int, seed: int, iters: int = 25
) -> tuple[np.ndarray, np.ndarray]:
    """K-means on the unit sphere: assign by max dot product, re-normalize means.

    Returns (centroids (nlist, d) float32 unit rows, assignments (n,) int32).
    Deterministic for a fixed seed; empty clusters are reseeded to the worst
    represented point.
    """
    n = rows.shape[0]
    nlist = min(nlist, n)
    rng = np.random.default_rng(seed)
    centroids = rows[rng.choice(n, size=nlist, replace=False)].astype(np.float64)

    assignments = np.zeros(n, dtype=np.int32)
    for _ in range(iters):
        sims = rows.astype(np.float64) @ centroids.T
        new_assign = np.argmax(sims, axis=1).astype(np.int32)
        best = sims[np.arange(n), new_assign]
        for c in range(nlist):
            members = new_assign == c
            if not np.any(members):
                worst = int(np.argmin(best))
                new_assign[worst] = c
                best[worst] = 1.0
                centroids[c] = rows[worst]
                continue
            mean = rows[members].astype(np.float64).mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm > 1e-12:
                centroids[c] = mean / norm
        if np.array_equal(new_assign, assignments):
            assignments = new_assign
            break
        assignments = new_assign
    return centroids.astype(np.float32), assignments


@dataclass(frozen=True)
class VectorIndex:
    dim: int
    ids: tuple[str, ...]
    matrix: np.ndarray  # (n, dim) float32, unit rows
    mode: str = MODE_EXACT
    nlist: int = 0
    nprobe: int = 0
    centroids: np.ndarray | None = None
    assignments: np.ndarray | None = None
    # rank of each row in ascending-id order; fixes tie-breaking
    id_ranks: np.ndarray = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return len(self.ids)

    def __contains__(self, entry_id: str) -> bool:
        return entry_id in self._id_set()

    def _id_set(self) -> frozenset:
        # cached on first use; frozen dataclass, so stash via object.__setattr__
        cached = getattr(self, "_ids_cached", None)
        if cached is None:
            cached = frozenset(self.ids)
            object.__setattr__(self, "_ids_cached", cached)
        return cached


def _make_ranks(ids: Sequence[str]) -> np.ndarray:
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    ranks = np.empty(len(ids), dtype=np.int64)
    for rank, i in enumerate(order):
        ranks[i] = rank
    return ranks


def build(
    vectors: Iterable[tuple[str, np.ndarray]],
    metric: str = "cosine",
    mode: str = MODE_EXACT,
    nlist: int = 16,
    nprobe: int = 4,
    seed: int = 0,
) -> VectorIndex:
    """Build an index over (id, vector) pairs.

    Vectors are normalized on the way in (ZeroVector if impossible); all
    must share one dimension. Coarse mode trains ``nlist`` centroids.
    """
    if metric != "cosine":
        raise ValueError(f"unsupported metric {metric!r}")
    pairs = list(vectors)
    if not pairs:
        raise ValueError("cannot build an index over zero vectors")
    ids = tuple(str(i) for i, _ in pairs)
    seen = set()
    for i in ids:
        if i in seen:
            raise DuplicateId(f"duplicate id {i!r}")
        seen.add(i)
    dim = int(np.asarray(pairs[0][1]).shape[0])
    rows = np.empty((len(pairs), dim), dtype=np.float64)
    for r, (_, vec) in enumerate(pairs):
        arr = np.asarray(vec, dtype=np.float64).ravel()
        if arr.shape[0] != dim:
            raise DimensionMismatch(f"entry {ids[r]!r} has dim {arr.shape[0]}, expected {dim}")
        rows[r] = arr
    matrix = _normalize_rows(rows)

    centroids = assignments = None
    if mode == MODE_COARSE:
        centroids, assignments = _spherical_kmeans(matrix, nlist, seed)
        nlist = centroids.shape[0]
        nprobe = min(nprobe, nlist)
    elif mode != MODE_EXACT:
        raise ValueError(f"unknown index mode {mode!r}")

    return VectorIndex(
        dim=dim,
        ids=ids,
        matrix=matrix,
        mode=mode,
        nlist=nlist if mode == MODE_COARSE else 0,
        nprobe=nprobe if mode == MODE_COARSE else 0,
        centroids=centroids,
        assignments=assignments,
        id_ranks=_make_ranks(ids),
    )


def _rank_rows(index: VectorIndex, row_idx: np.ndarray, scores: np.ndarray, k: int):
    order = np.lexsort((index.id_ranks[row_idx], -scores))
    top = order[: min(k, row_idx.shape[0])]
    picked = row_idx[top]
    picked_scores = np.clip(scores[top], -1.0, 1.0)
    return [(index.ids[i], float(s)) for i, s in zip(picked, picked_scores)]


def search(index: VectorIndex, query: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Top-k (id, cosine score), score-descending, ties broken by ascending id.

    Exact mode returns the true top-k; coarse mode scans the ``nprobe``
    nearest inverted lists.
    """
    q = np.asarray(query, dtype=np.float64).ravel()
    if q.shape[0] != index.dim:
        raise DimensionMismatch(f"query dim {q.shape[0]} != index dim {index.dim}")
    norm = np.linalg.norm(q)
    if norm < 1e-12:
        raise ZeroVector("query has zero norm")
    q = q / norm
    if k <= 0:
        return []

    if index.mode == MODE_EXACT:
        scores = index.matrix.astype(np.float64, copy=False) @ q
        return _rank_rows(index, np.arange(index.size), scores, k)

    centroid_scores = index.centroids.astype(np.float64) @ q
    probe_order = np.lexsort((np.arange(index.nlist), -centroid_scores))
    probes = probe_order[: index.nprobe]
    mask = np.isin(index.assignments, probes)
    candidates = np.nonzero(mask)[0]
    if candidates.shape[0] == 0:
        return []
    scores = index.matrix[candidates].astype(np.float64) @ q
    return _rank_rows(index, candidates, scores, k)


def insert(index: VectorIndex, entries: Iterable[tuple[str, np.ndarray]]) -> VectorIndex:
    """Return a new index containing the old entries plus ``entries``.

    Coarse mode assigns new rows to their nearest existing centroid without
    retraining. The original index is untouched.
    """
    new = list(entries)
    if not new:
        return index
    existing = set(index.ids)
    new_ids = []
    rows = np.empty((len(new), index.dim), dtype=np.float64)
    for r, (entry_id, vec) in enumerate(new):
        entry_id = str(entry_id)
        if entry_id in existing or entry_id in new_ids:
            raise DuplicateId(f"id {entry_id!r} already present")
        arr = np.asarray(vec, dtype=np.float64).ravel()
        if arr.shape[0] != index.dim:
            raise DimensionMismatch(
                f"entry {entry_id!r} has dim {arr.shape[0]}, expected {index.dim}"
            )
        new_ids.append(entry_id)
        rows[r] = arr
    normalized = _normalize_rows(rows)

    assignments = index.assignments
    if index.mode == MODE_COARSE:
        sims = normalized.astype(np.float64) @ index.centroids.astype(np.float64).T
        new_assign = np.argmax(sims, axis=1).astype(np.int32)
        assignments = np.concatenate([index.assignments, new_assign])

    ids = index.ids + tuple(new_ids)
    return VectorIndex(
        dim=index.dim,
        ids=ids,
        matrix=np.vstack([index.matrix, normalized]),
        mode=index.mode,
        nlist=index.nlist,
        nprobe=index.nprobe,
        centroids=index.centroids,
        assignments=assignments,
        id_ranks=_make_ranks(ids),
    )


# --- persistence ---------------------------------------------------------------

_FIXED_HEADER = struct.Struct("<4sIIQB")  # magic, version, dim, count, mode tag


def save_index(index: VectorIndex, path: str | Path) -> None:
    """Binary container with a trailing SHA-256 of all preceding bytes."""
    parts = [
        _FIXED_HEADER.pack(
            _INDEX_MAGIC,
            _INDEX_VERSION,
            index.dim,
            index.size,
            0 if index.mode == MODE_EXACT else 1,
        )
    ]
    if index.mode == MODE_COARSE:
        parts.append(struct.pack("<II", index.nlist, index.nprobe))
        parts.append(np.ascontiguousarray(index.centroids, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(index.assignments, dtype="<i4").tobytes())
    for entry_id in index.ids:
        raw = entry_id.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    parts.append(np.ascontiguousarray(index.matrix, dtype="<f4").tobytes())
    blob = b"".join(parts)
    digest = hashlib.sha256(blob).digest()
    with open(path, "wb") as f:
        f.write(blob)
        f.write(digest)


def load_index(path: str | Path) -> VectorIndex:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < _FIXED_HEADER.size + 32:
        raise CorruptFile(f"{path}: file too short")
    blob, digest = data[:-32], data[-32:]
    if hashlib.sha256(blob).digest() != digest:
        raise CorruptFile(f"{path}: checksum mismatch")
    magic, version, dim, count, mode_tag = _FIXED_HEADER.unpack_from(blob)
    if magic != _INDEX_MAGIC:
        raise CorruptFile(f"{path}: bad magic {magic!r}")
    if version != _INDEX_VERSION:
        raise CorruptFile(f"{path}: unsupported version {version}")
    offset = _FIXED_HEADER.size

    mode = MODE_EXACT if mode_tag == 0 else MODE_COARSE
    nlist = nprobe = 0
    centroids = assignments = None
    if mode == MODE_COARSE:
        nlist, nprobe = struct.unpack_from("<II", blob, offset)
        offset += 8
        cbytes = 4 * nlist * dim
        centroids = np.frombuffer(blob, dtype="<f4", count=nlist * dim, offset=offset)
        centroids = centroids.reshape(nlist, dim).astype(np.float32)
        offset += cbytes
        assignments = np.frombuffer(blob, dtype="<i4", count=count, offset=offset).astype(
            np.int32
        )
        offset += 4 * count

    ids = []
    for _ in range(count):
        (id_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        ids.append(blob[offset : offset + id_len].decode("utf-8"))
        offset += id_len

    expected = offset + 4 * count * dim
    if len(blob) != expected:
        raise CorruptFile(f"{path}: expected {expected} payload bytes, found {len(blob)}")
    matrix = (
        np.frombuffer(blob, dtype="<f4", count=count * dim, offset=offset)
        .reshape(count, dim)
        .astype(np.float32)
    )
    ids = tuple(ids)
    return VectorIndex(
        dim=dim,
        ids=ids,
        matrix=matrix,
        mode=mode,
        nlist=nlist,
        nprobe=nprobe,
        centroids=centroids,
        assignments=assignments,
        id_ranks=_make_ranks(ids),
    )
