"""Contrastive fine-tuning of the encoder projection.

The loss contrasts each query against its positive chunk versus the other
positives in the batch (kept single-task by homogeneous batching) plus any
mined hard negatives. Gradients with respect to the projection are exact and
sparse: only feature columns touched by the batch move. Optimization is Adam
applied lazily to those columns.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from . import index as vindex
from .chunking import Chunk
from .distill import QAPair
from .encoder import EncoderModel, Featurizer
from .errors import DegenerateBatch, NonFiniteLoss

logger = logging.getLogger(__name__)

MIXED_TASK = "mixed"


@dataclass
class TrainingBatch:
    """One contrastive step's pairs. ``hard_negatives`` aligns with ``pairs``;
    no hard-negative id may equal its pair's positive id."""

    task: str
    pairs: list[tuple[str, str]]  # (query text, positive chunk id)
    hard_negatives: list[list[str]] = field(default_factory=list)

    def __post_init__(self):
        if not self.hard_negatives:
            self.hard_negatives = [[] for _ in self.pairs]
        if len(self.hard_negatives) != len(self.pairs):
            raise ValueError("hard_negatives must align with pairs")
        for (_, pos_id), negs in zip(self.pairs, self.hard_negatives):
            if pos_id in negs:
                raise ValueError(f"hard negative equals the positive chunk {pos_id!r}")


@dataclass
class SparseGrad:
    """Gradient restricted to the touched projection columns."""

    cols: np.ndarray  # sorted unique int64
    data: np.ndarray  # (embed_dim, len(cols)) float64

    def to_dense(self, hash_dims: int) -> np.ndarray:
        dense = np.zeros((self.data.shape[0], hash_dims), dtype=np.float64)
        dense[:, self.cols] = self.data
        return dense


def _batch_texts(batch: TrainingBatch, chunk_texts: Mapping[str, str]):
    """Unique texts of a batch and per-role index maps."""
    texts: list[str] = []
    lookup: dict[str, int] = {}

    def intern(text: str) -> int:
        if text not in lookup:
            lookup[text] = len(texts)
            texts.append(text)
        return lookup[text]

    query_rows = [intern(q) for q, _ in batch.pairs]
    pos_rows = [intern(chunk_texts[pid]) for _, pid in batch.pairs]
    neg_rows = [[intern(chunk_texts[nid]) for nid in negs] for negs in batch.hard_negatives]
    return texts, query_rows, pos_rows, neg_rows


def _forward(
    projection: np.ndarray,
    tau: float,
    batch: TrainingBatch,
    chunk_texts: Mapping[str, str],
    featurizer: Featurizer,
    with_grad: bool,
):
    """Shared forward pass; optionally accumulates the embedding gradient.

    Negatives for pair i are the other pairs' positive chunks (excluding any
    that coincide with pair i's own positive) plus pair i's hard negatives.
    """
    if not batch.pairs:
        raise ValueError("empty batch")
    n_pairs = len(batch.pairs)
    if n_pairs == 1 and not batch.hard_negatives[0]:
        raise DegenerateBatch("one pair and no negatives: loss is identically 0")

    texts, query_rows, pos_rows, neg_rows = _batch_texts(batch, chunk_texts)
    indptr, indices, values = featurizer.csr(texts)
    raw = _kernels.project_rows(projection, indptr, indices, values)
    norms = np.linalg.norm(raw, axis=1)
    embeddings = raw / norms[:, None]

    pos_ids = [pid for _, pid in batch.pairs]
    grad_e = np.zeros_like(embeddings) if with_grad else None
    total = 0.0
    any_negative = False

    for i in range(n_pairs):
        q = query_rows[i]
        cand_rows = [
            pos_rows[j] for j in range(n_pairs) if j != i and pos_ids[j] != pos_ids[i]
        ] + neg_rows[i]
        if not cand_rows:
            continue
        any_negative = True
        rows = np.array([pos_rows[i]] + cand_rows, dtype=np.int64)
        sims = embeddings[rows] @ embeddings[q]
        logits = sims / tau
        m = logits.max()
        exp = np.exp(logits - m)
        total += float(np.log(exp.sum()) + m - logits[0])

        if with_grad:
            softmax = exp / exp.sum()
            coeff = softmax / (tau * n_pairs)
            coeff[0] -= 1.0 / (tau * n_pairs)
            grad_e[q] += coeff @ embeddings[rows]
            np.add.at(grad_e, rows, coeff[:, None] * embeddings[q][None, :])

    if not any_negative:
        raise DegenerateBatch("no pair in the batch has any negative")

    loss = total / n_pairs
    return loss, (grad_e, embeddings, norms, indptr, indices, values)


def contrastive_loss_value(
    projection: np.ndarray,
    batch: TrainingBatch,
    chunk_texts: Mapping[str, str],
    temperature: float,
    featurizer: Featurizer,
) -> float:
    """Loss as a plain function of an arbitrary-precision projection matrix.

    This is the evaluation path finite-difference checks perturb.
    """
    loss, _ = _forward(projection, temperature, batch, chunk_texts, featurizer, with_grad=False)
    return loss


def infonce_loss(
    model: EncoderModel,
    batch: TrainingBatch,
    chunk_texts: Mapping[str, str],
    featurizer: Featurizer | None = None,
) -> tuple[float, SparseGrad]:
    """Mean contrastive loss over the batch and its exact projection gradient.

    Raises DegenerateBatch when no pair has a single negative.
    """
    featurizer = featurizer or Featurizer.for_model(model)
    loss, internals = _forward(
        model.projection, model.temperature, batch, chunk_texts, featurizer, with_grad=True
    )
    grad_e, embeddings, norms, indptr, indices, values = internals

    # back through L2 normalization: g_z = (g_e - (e . g_e) e) / ||z||
    inner = np.sum(grad_e * embeddings, axis=1, keepdims=True)
    grad_raw = (grad_e - inner * embeddings) / norms[:, None]

    cols = np.unique(indices)
    positions = np.searchsorted(cols, indices)
    grad_cols = np.zeros((model.embed_dim, cols.shape[0]), dtype=np.float64)
    _kernels.scatter_grad(grad_cols, indptr, positions, values, grad_raw)
    return loss, SparseGrad(cols=cols, data=grad_cols)


# --- batching ---------------------------------------------------------------------


def _slice_batches(
    ordered: list[int],
    dataset: Sequence[QAPair],
    negatives: Sequence[list[str]] | None,
    batch_size: int,
    task_label: str,
) -> list[TrainingBatch]:
    batches = []
    for start in range(0, len(ordered), batch_size):
        chosen = ordered[start : start + batch_size]
        batches.append(
            TrainingBatch(
                task=task_label,
                pairs=[(dataset[i].question, dataset[i].gold_chunk_ids[0]) for i in chosen],
                hard_negatives=[list(negatives[i]) if negatives else [] for i in chosen],
            )
        )
    return batches


def make_homogeneous_batches(
    dataset: Sequence[QAPair],
    batch_size: int,
    seed: int,
    hard_negatives: Sequence[list[str]] | None = None,
) -> list[TrainingBatch]:
    """Single-task batches, shuffled within each task by ``seed``.

    The final undersized batch of each task is retained. ``hard_negatives``
    (aligned with ``dataset``) is sliced along with the pairs. Pairs must
    carry at least one gold chunk id.
    """
    for p in dataset:
        if not p.gold_chunk_ids:
            raise ValueError("training pairs must have gold chunk ids")
    rng = random.Random(seed)
    by_task: dict[str, list[int]] = {}
    for i, pair in enumerate(dataset):
        by_task.setdefault(pair.task, []).append(i)

    batches: list[TrainingBatch] = []
    for task in by_task:  # first-appearance order, deterministic
        order = by_task[task][:]
        rng.shuffle(order)
        batches.extend(_slice_batches(order, dataset, hard_negatives, batch_size, task))
    rng.shuffle(batches)
    return batches


def make_mixed_batches(
    dataset: Sequence[QAPair],
    batch_size: int,
    seed: int,
    hard_negatives: Sequence[list[str]] | None = None,
) -> list[TrainingBatch]:
    """Task-agnostic batches (the homogeneity ablation's off switch)."""
    for p in dataset:
        if not p.gold_chunk_ids:
            raise ValueError("training pairs must have gold chunk ids")
    rng = random.Random(seed)
    order = list(range(len(dataset)))
    rng.shuffle(order)
    return _slice_batches(order, dataset, hard_negatives, batch_size, MIXED_TASK)


# --- hard negative mining ------------------------------------------------------------


def mine_hard_negatives(
    pairs: Sequence[QAPair],
    index: vindex.VectorIndex,
    model: EncoderModel,
    k: int = 10,
    m: int = 5,
    featurizer: Featurizer | None = None,
) -> list[list[str]]:
    """Per-pair near-miss chunks: top-k retrieved minus every gold id, first m kept."""
    featurizer = featurizer or Featurizer.for_model(model)
    out = []
    for pair in pairs:
        query_vec = _embed_with(model, pair.question, featurizer)
        results = vindex.search(index, query_vec, k)
        gold = set(pair.gold_chunk_ids)
        negs = [cid for cid, _ in results if cid not in gold][:m]
        out.append(negs)
    return out


def _embed_with(model: EncoderModel, text: str, featurizer: Featurizer) -> np.ndarray:
    indptr, indices, values = featurizer.csr([text])
    raw = _kernels.project_rows(model.projection, indptr, indices, values)
    return (raw / np.linalg.norm(raw, axis=1, keepdims=True))[0]


def build_chunk_index(
    model: EncoderModel, chunks: Sequence[Chunk], featurizer: Featurizer | None = None
) -> vindex.VectorIndex:
    """Exact index over the rendered texts of ``chunks`` under ``model``."""
    featurizer = featurizer or Featurizer.for_model(model)
    texts = [c.rendered() for c in chunks]
    indptr, indices, values = featurizer.csr(texts)
    raw = _kernels.project_rows(model.projection, indptr, indices, values)
    embeddings = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    return vindex.build([(c.id, embeddings[i]) for i, c in enumerate(chunks)])


# --- optimizer and training loop -------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 1
    lr: float = 1e-3
    batch_size: int = 16
    temperature: float | None = None
    hard_neg_k: int = 10
    hard_neg_m: int = 5
    seed: int = 0
    his: bool = True
    ahns: bool = True
    negative_pool: int = 1  # adjacent same-task sub-batches fused per step
    refresh_negatives: bool = False  # re-mine with the evolving model each epoch
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    adam_eps: float = 1e-8


@dataclass
class TrainResult:
    model: EncoderModel
    epoch_losses: list[float]


class _LazyAdam:
    """Adam whose moments live only on touched columns (sparse-friendly)."""

    def __init__(self, lr: float, beta1: float, beta2: float, eps: float):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}

    def step(self, weights: np.ndarray, grad: SparseGrad) -> None:
        self.step_count += 1
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        for pos in range(grad.cols.shape[0]):
            col = int(grad.cols[pos])
            g = grad.data[:, pos]
            m = self._m.get(col)
            if m is None:
                m = np.zeros_like(g)
                v = np.zeros_like(g)
            else:
                v = self._v[col]
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self._m[col] = m
            self._v[col] = v
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            weights[:, col] -= (self.lr * update).astype(np.float32)


def _pool_batches(batches: list[TrainingBatch], pool: int) -> list[TrainingBatch]:
    """Fuse runs of adjacent same-task batches into wider contrastive steps."""
    if pool <= 1:
        return batches
    fused: list[TrainingBatch] = []
    i = 0
    while i < len(batches):
        group = [batches[i]]
        while (
            len(group) < pool
            and i + len(group) < len(batches)
            and batches[i + len(group)].task == batches[i].task
        ):
            group.append(batches[i + len(group)])
        fused.append(
            TrainingBatch(
                task=batches[i].task,
                pairs=[p for b in group for p in b.pairs],
                hard_negatives=[n for b in group for n in b.hard_negatives],
            )
        )
        i += len(group)
    return fused


def train(
    model: EncoderModel,
    data_em: Sequence[QAPair],
    chunks: Sequence[Chunk],
    config: TrainConfig,
) -> TrainResult:
    """Contrastive fine-tuning; returns the new model and per-epoch mean losses.

    The input model is never mutated. Negative mining defaults to the
    pre-training model (refresh_negatives switches to the evolving one).
    Deterministic for a fixed config.
    """
    trained = model.clone()
    if config.temperature is not None:
        trained.temperature = config.temperature
    usable = [p for p in data_em if p.gold_chunk_ids]
    skipped = len(data_em) - len(usable)
    if skipped:
        logger.warning("skipping %d pairs without gold chunk ids", skipped)
    if config.epochs <= 0 or not usable:
        return TrainResult(model=trained, epoch_losses=[])

    chunk_texts = {c.id: c.rendered() for c in chunks}
    featurizer = Featurizer.for_model(trained)
    initial = model.clone()
    optimizer = _LazyAdam(config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps)
    make_batches = make_homogeneous_batches if config.his else make_mixed_batches

    negatives: list[list[str]] | None = None
    epoch_losses: list[float] = []
    for epoch in range(config.epochs):
        if config.ahns and (negatives is None or config.refresh_negatives):
            miner = trained if config.refresh_negatives else initial
            mining_index = build_chunk_index(miner, chunks, featurizer)
            negatives = mine_hard_negatives(
                usable, mining_index, miner, config.hard_neg_k, config.hard_neg_m, featurizer
            )
        batches = make_batches(usable, config.batch_size, config.seed + epoch, negatives)
        batches = _pool_batches(batches, config.negative_pool)

        losses = []
        for step, batch in enumerate(batches):
            try:
                loss, grad = infonce_loss(trained, batch, chunk_texts, featurizer)
            except DegenerateBatch:
                logger.warning("epoch %d step %d: degenerate batch skipped", epoch, step)
                continue
            if not np.isfinite(loss):
                raise NonFiniteLoss(
                    f"epoch {epoch} step {step}: loss={loss} "
                    f"(lr={config.lr}, tau={trained.temperature}, batch={len(batch.pairs)})"
                )
            optimizer.step(trained.projection, grad)
            losses.append(loss)
        mean_loss = float(np.mean(losses)) if losses else 0.0
        epoch_losses.append(mean_loss)
        logger.info("epoch %d/%d mean loss %.4f", epoch + 1, config.epochs, mean_loss)

    return TrainResult(model=trained, epoch_losses=epoch_losses)


__all__ = [
    "TrainingBatch",
    "SparseGrad",
    "contrastive_loss_value",
    "infonce_loss",
    "make_homogeneous_batches",
    "make_mixed_batches",
    "mine_hard_negatives",
    "build_chunk_index",
    "TrainConfig",
    "TrainResult",
    "train",
]
