"""Online QA process: embed the question, retrieve, wrap, generate.

Also builds the retrieval-augmented fine-tuning dataset (query + retrieved
chunks + target answer) and evaluates its negative-mean-log-likelihood
objective given per-example target log-probabilities from any backend.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import index as vindex
from . import prompts
from .backends import GenerationBackend
from .chunking import Chunk
from .distill import QAPair, eval_task_of
from .encoder import EncoderModel, embed
from .errors import EmptyIndex, PositiveLogProb


@dataclass(frozen=True)
class PromptInstance:
    task: str
    question: str
    segments: tuple[tuple[int, str, str], ...]  # (index, chunk_id, text)
    rendered: str


def assemble_prompt(
    question: str,
    chunks: Sequence[tuple[str, str]],
    task: str,
    allow_zero_context: bool = False,
) -> PromptInstance:
    """Wrap a question and its retrieved chunks in the task's template.

    ``chunks`` is an ordered list of (chunk_id, text) in retrieval-score
    order; segments are numbered from 0 in that order.
    """
    if not chunks and not allow_zero_context:
        raise ValueError("no retrieved chunks; zero-context prompts are disabled")
    template = prompts.qa_template(task)
    segments = tuple((i, cid, text) for i, (cid, text) in enumerate(chunks))
    rendered = template.format(
        question=question, segments=prompts.render_segments([t for _, _, t in segments])
    )
    return PromptInstance(task=task, question=question, segments=segments, rendered=rendered)


@dataclass(frozen=True)
class CitedChunk:
    id: str
    score: float
    text: str


@dataclass(frozen=True)
class AnswerRecord:
    answer: str
    cited_chunks: tuple[CitedChunk, ...]
    retrieval_ms: float
    generation_ms: float
    session_id: str


def answer(
    question: str,
    task: str,
    k: int,
    encoder: EncoderModel,
    index: vindex.VectorIndex,
    backend: GenerationBackend,
    chunk_lookup: Mapping[str, Chunk],
    session_id: str | None = None,
    allow_zero_context: bool = False,
) -> AnswerRecord:
    """Run one question through retrieve → wrap → generate.

    The question is embedded with the same encoder that embedded the chunks.
    Both latencies are wall-clock milliseconds.
    """
    if index.size == 0:
        raise EmptyIndex("cannot answer against an empty index")
    t0 = time.perf_counter()
    query_vec = embed(encoder, question)
    results = vindex.search(index, query_vec, k)
    retrieval_ms = (time.perf_counter() - t0) * 1000.0

    cited = tuple(
        CitedChunk(id=cid, score=score, text=chunk_lookup[cid].rendered())
        for cid, score in results
    )
    prompt = assemble_prompt(
        question, [(c.id, c.text) for c in cited], task, allow_zero_context
    )
    t1 = time.perf_counter()
    text = backend.complete([{"role": "user", "content": prompt.rendered}])
    generation_ms = (time.perf_counter() - t1) * 1000.0

    return AnswerRecord(
        answer=text,
        cited_chunks=cited,
        retrieval_ms=retrieval_ms,
        generation_ms=generation_ms,
        session_id=session_id or uuid.uuid4().hex,
    )


# --- retrieval-augmented fine-tuning dataset ------------------------------------


@dataclass(frozen=True)
class RaftExample:
    question: str
    retrieved: tuple[tuple[str, str], ...]  # (chunk_id, text), score order
    answer: str
    task: str

    def rendered(self) -> str:
        return assemble_prompt(self.question, list(self.retrieved), self.task).rendered


def build_raft_dataset(
    pairs: Sequence[QAPair],
    encoder: EncoderModel,
    index: vindex.VectorIndex,
    k: int,
    chunk_lookup: Mapping[str, Chunk],
) -> list[RaftExample]:
    """One example per QA pair: the pair's question, its top-k retrieved
    chunks under ``encoder``, and the answer copied unchanged."""
    if index.size == 0:
        raise EmptyIndex("cannot build a fine-tuning dataset against an empty index")
    if k > index.size:
        raise ValueError(f"k={k} exceeds index size {index.size}")
    examples = []
    for pair in pairs:
        query_vec = embed(encoder, pair.question)
        results = vindex.search(index, query_vec, k)
        retrieved = tuple((cid, chunk_lookup[cid].rendered()) for cid, _ in results)
        examples.append(
            RaftExample(
                question=pair.question,
                retrieved=retrieved,
                answer=pair.answer,
                task=eval_task_of(pair.task),
            )
        )
    return examples


def raft_loss(target_log_probs: Iterable[float]) -> float:
    """Negative mean of per-example target log-probabilities.

    Inputs must be <= 0 (they are log-probabilities); 0 means a certain
    prediction, so an all-zero input floors the loss at 0.
    """
    values = np.asarray(list(target_log_probs), dtype=np.float64)
    if values.size == 0:
        raise ValueError("need at least one example")
    if np.any(values > 0.0):
        raise PositiveLogProb("log-probabilities must be <= 0")
    return float(-np.mean(values))


def write_raft_dataset(examples: Sequence[RaftExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            rec = {
                "question": ex.question,
                "chunk_ids": [cid for cid, _ in ex.retrieved],
                "answer": ex.answer,
                "task": ex.task,
            }
            f.write(json.dumps(rec, ensure_ascii=False))
            f.write("\n")


def read_raft_dataset(path: str | Path, chunk_lookup: Mapping[str, Chunk]) -> list[RaftExample]:
    examples = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            examples.append(
                RaftExample(
                    question=rec["question"],
                    retrieved=tuple(
                        (cid, chunk_lookup[cid].rendered()) for cid in rec["chunk_ids"]
                    ),
                    answer=rec["answer"],
                    task=rec["task"],
                )
            )
    return examples
