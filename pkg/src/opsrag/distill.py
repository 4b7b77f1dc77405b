"""QA-pair generation and dataset combination.

Chunks are distilled into QA pairs through a generation backend with a
dynamic per-chunk call budget; malformed responses get one retry on the
escalation tier. Log-derived questions are rewritten so they stop appearing
verbatim in their own retrieval context. All sources merge into the
encoder/LLM fine-tuning datasets.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from . import prompts
from .chunking import Chunk
from .backends import GenerationBackend
from .errors import ExhaustedEscalation, FormatError

logger = logging.getLogger(__name__)

TASK_QAK_LOG = "QAK-Log"
TASK_QAK_GPT = "QAK-GPT"
TASK_QAT_LOG = "QAT-Log"
QA_TASKS = (TASK_QAK_LOG, TASK_QAK_GPT, TASK_QAT_LOG)


@dataclass(frozen=True)
class QAPair:
    question: str
    answer: str
    task: str
    gold_chunk_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.question.strip() or not self.answer.strip():
            raise ValueError("question and answer must be non-empty")
        if self.task not in QA_TASKS:
            raise ValueError(f"unknown task label {self.task!r}")
        if not self.gold_chunk_ids and self.task != TASK_QAT_LOG:
            raise ValueError(f"{self.task} pairs must carry gold chunk ids")


def eval_task_of(pair_task: str) -> str:
    """Map a dataset task label onto the serving/eval task family."""
    return prompts.TASK_TROUBLESHOOTING if pair_task == TASK_QAT_LOG else prompts.TASK_KNOWLEDGE


# --- call budget -----------------------------------------------------------------


def call_count(n_chars: int) -> int:
    """Number of generation calls for a chunk of ``n_chars`` characters.

    Half-away-from-zero rounding of 2 + (n - 1000)/500, clamped to >= 1.
    """
    if n_chars < 0:
        raise ValueError("character count must be non-negative")
    raw = 2.0 + (n_chars - 1000) / 500.0
    rounded = math.floor(raw + 0.5) if raw >= 0 else math.ceil(raw - 0.5)
    return max(1, int(rounded))


# --- response wire format -----------------------------------------------------------

_SEGMENT_RE = re.compile(r"^\s*Q:\s*(?P<q>.+?)\s*A:\s*(?P<a>.+?)\s*$", re.DOTALL)


def parse_qa_response(
    text: str, task: str = TASK_QAK_GPT, gold_chunk_ids: tuple[str, ...] = ()
) -> list[QAPair]:
    """Parse "Q: ... A: ..." segments joined by the separator marker.

    The unknown marker alone yields an empty list. A segment missing either
    side raises FormatError.
    """
    stripped = text.strip()
    if stripped == prompts.UNK_MARKER:
        return []
    pairs = []
    for segment in stripped.split(prompts.SEP_MARKER):
        m = _SEGMENT_RE.match(segment)
        if not m or not m.group("q").strip() or not m.group("a").strip():
            raise FormatError(f"segment not in 'Q: ... A: ...' form: {segment[:80]!r}")
        pairs.append(
            QAPair(
                question=m.group("q").strip(),
                answer=m.group("a").strip(),
                task=task,
                gold_chunk_ids=gold_chunk_ids,
            )
        )
    return pairs


def render_qa_response(pairs: Sequence[QAPair]) -> str:
    """Canonical inverse of parse_qa_response (used for round-trip checks)."""
    if not pairs:
        return prompts.UNK_MARKER
    return prompts.SEP_MARKER.join(f"Q: {p.question} A: {p.answer}" for p in pairs)


# --- distillation --------------------------------------------------------------------


def generate_qa(
    chunk: Chunk,
    backend: GenerationBackend,
    escalation: GenerationBackend,
) -> list[QAPair]:
    """Distill QA pairs from one chunk.

    Issues ``call_count(len(rendered))`` standard-tier requests. A request
    whose response fails to parse is reissued once on the escalation tier;
    if that also fails, ExhaustedEscalation propagates.
    """
    if not chunk.body.strip():
        raise ValueError(f"chunk {chunk.id} has an empty body")
    content = chunk.rendered()
    messages = [{"role": "user", "content": prompts.DISTILL_PROMPT.format(content=content)}]
    budget = call_count(len(content))
    collected: list[QAPair] = []
    for i in range(budget):
        text = backend.complete(messages)
        try:
            parsed = parse_qa_response(text, task=TASK_QAK_GPT, gold_chunk_ids=(chunk.id,))
        except FormatError:
            logger.warning("chunk %s call %d/%d: malformed response, escalating", chunk.id, i + 1, budget)
            text = escalation.complete(messages)
            try:
                parsed = parse_qa_response(text, task=TASK_QAK_GPT, gold_chunk_ids=(chunk.id,))
            except FormatError as exc:
                raise ExhaustedEscalation(
                    f"chunk {chunk.id}: both tiers returned unparseable output"
                ) from exc
        collected.extend(parsed)
    return collected


@dataclass(frozen=True)
class RewriteResult:
    pair: QAPair
    unchanged: bool


def rewrite_question(pair: QAPair, backend: GenerationBackend) -> RewriteResult:
    """Rewrite a log-derived question; answer and gold ids are untouched.

    An output byte-equal to (or emptier than) the input is kept but flagged
    ``unchanged`` — a warning, not a failure.
    """
    if pair.task not in (TASK_QAK_LOG, TASK_QAT_LOG):
        raise ValueError(f"rewrite applies to log-derived pairs, not {pair.task}")
    messages = [
        {"role": "user", "content": prompts.REWRITE_PROMPT.format(content=pair.question)}
    ]
    new_question = backend.complete(messages).strip()
    if not new_question or new_question == pair.question:
        logger.warning("rewrite left question unchanged: %.60s", pair.question)
        return RewriteResult(pair=pair, unchanged=True)
    return RewriteResult(pair=replace(pair, question=new_question), unchanged=False)


def rewrite_questions(
    pairs: Sequence[QAPair], backend: GenerationBackend
) -> tuple[list[QAPair], list[int]]:
    """Rewrite a batch, preserving order; returns (pairs, unchanged indices)."""
    out, flagged = [], []
    for i, pair in enumerate(pairs):
        result = rewrite_question(pair, backend)
        out.append(result.pair)
        if result.unchanged:
            flagged.append(i)
    return out, flagged


# --- combination ------------------------------------------------------------------------


@dataclass(frozen=True)
class CombinedDatasets:
    data_em: tuple[QAPair, ...]
    data_llm: tuple[QAPair, ...]


def combine_datasets(
    tc: Sequence[Chunk],
    qak_log: Sequence[QAPair],
    qak_gpt: Sequence[QAPair],
    qat_log: Sequence[QAPair],
) -> CombinedDatasets:
    """Union of the three QA sources, deduplicated on (question, answer).

    Both outputs are the same record set; task labels survive for
    homogeneous batching. Gold ids must resolve against the chunk set.
    """
    known = {c.id for c in tc}
    merged: list[QAPair] = []
    seen: set[tuple[str, str]] = set()
    for source in (qak_log, qak_gpt, qat_log):
        for pair in source:
            missing = [g for g in pair.gold_chunk_ids if g not in known]
            if missing:
                raise ValueError(f"gold chunk ids not in corpus: {missing}")
            key = (pair.question, pair.answer)
            if key in seen:
                continue
            seen.add(key)
            merged.append(pair)
    frozen = tuple(merged)
    return CombinedDatasets(data_em=frozen, data_llm=frozen)


# --- JSONL IO ---------------------------------------------------------------------------


def write_qa_pairs(pairs: Iterable[QAPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            rec = {
                "question": p.question,
                "answer": p.answer,
                "task": p.task,
                "gold_chunk_ids": list(p.gold_chunk_ids),
            }
            f.write(json.dumps(rec, ensure_ascii=False))
            f.write("\n")


def read_qa_pairs(path: str | Path) -> list[QAPair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            pairs.append(
                QAPair(
                    question=rec["question"],
                    answer=rec["answer"],
                    task=rec["task"],
                    gold_chunk_ids=tuple(rec.get("gold_chunk_ids", ())),
                )
            )
    return pairs
