"""Retrieval metrics, latency measurement, and the judge protocols.

Top-k accuracy counts a question as a hit when any retrieved id is one of
its gold chunks. Judge scoring comes in two modes: single-score (three
independent 1-10 ratings, averaged) and pairwise (two order-swapped calls;
disagreement collapses to a tie).
"""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import index as vindex
from . import prompts
from .backends import GenerationBackend
from .chunking import Chunk
from .distill import QAPair
from .encoder import EncoderModel, embed
from .errors import EmptyEvalSet, JudgeUnparseable
from .training import TrainConfig, build_chunk_index, train

logger = logging.getLogger(__name__)

JUDGE_RETRIES = 2  # re-asks per unparseable judge response

VERDICT_A = "A"
VERDICT_B = "B"
VERDICT_TIE = "Tie"


@dataclass(frozen=True)
class EvalQuestion:
    question: str
    task: str
    gold_chunk_ids: tuple[str, ...]
    reference_answer: str

    def __post_init__(self):
        if not self.gold_chunk_ids:
            raise ValueError("eval questions need at least one gold chunk id")


@dataclass(frozen=True)
class JudgeVerdict:
    mode: str  # "single" | "pairwise"
    rating: int | None = None
    verdict: str | None = None
    explanation: str = ""


def read_eval_set(path: str | Path) -> list[EvalQuestion]:
    questions = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            questions.append(
                EvalQuestion(
                    question=rec["question"],
                    task=rec["task"],
                    gold_chunk_ids=tuple(rec["gold_chunk_ids"]),
                    reference_answer=rec.get("reference_answer", ""),
                )
            )
    return questions


def write_eval_set(questions: Iterable[EvalQuestion], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for q in questions:
            rec = {
                "question": q.question,
                "task": q.task,
                "gold_chunk_ids": list(q.gold_chunk_ids),
                "reference_answer": q.reference_answer,
            }
            f.write(json.dumps(rec, ensure_ascii=False))
            f.write("\n")


# --- retrieval accuracy -----------------------------------------------------------


def acc_at_k(
    questions: Sequence[EvalQuestion],
    encoder: EncoderModel,
    index: vindex.VectorIndex,
    k: int,
) -> float:
    """Fraction of questions whose top-k retrieved set intersects the gold set."""
    if not questions:
        raise EmptyEvalSet("no questions to evaluate")
    hits = 0
    for q in questions:
        results = vindex.search(index, embed(encoder, q.question), k)
        retrieved = {cid for cid, _ in results}
        if retrieved & set(q.gold_chunk_ids):
            hits += 1
    return hits / len(questions)


def measure_latency(
    index: vindex.VectorIndex,
    encoder: EncoderModel,
    queries: Sequence[str],
    k: int,
    repetitions: int = 3,
) -> dict[str, float]:
    """Wall-clock embed+search stats per query; one warm-up pass is excluded."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    for q in queries:  # warm-up: JIT, caches
        vindex.search(index, embed(encoder, q), k)
    samples = []
    for _ in range(repetitions):
        for q in queries:
            t0 = time.perf_counter()
            vindex.search(index, embed(encoder, q), k)
            samples.append((time.perf_counter() - t0) * 1000.0)
    arr = np.asarray(samples)
    return {
        "mean_ms": float(arr.mean()),
        "p50_ms": float(np.percentile(arr, 50)),
        "p95_ms": float(np.percentile(arr, 95)),
    }


# --- judge protocols ------------------------------------------------------------------

_FENCED_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)
_BRACE_RE = re.compile(r"\{[^{}]*\}", re.DOTALL)


def parse_judge_json(text: str) -> JudgeVerdict:
    """Extract the last JSON object containing "rating" or "verdict".

    Fenced blocks are preferred; bare objects are also accepted. Ratings
    outside 1..10 and verdicts outside {A, B, Tie} are rejected.
    """
    candidates = [m.group(1) for m in _FENCED_RE.finditer(text)]
    candidates += [m.group(0) for m in _BRACE_RE.finditer(text)]
    parsed = None
    for raw in reversed(candidates):
        try:
            obj = json.loads(raw.strip())
        except json.JSONDecodeError:
            continue
        if isinstance(obj, dict) and ("rating" in obj or "verdict" in obj):
            parsed = obj
            break
    if parsed is None:
        raise JudgeUnparseable("no JSON object with a rating or verdict found")

    explanation = str(parsed.get("explanation", ""))
    if "rating" in parsed:
        try:
            rating = int(str(parsed["rating"]).strip())
        except ValueError:
            raise JudgeUnparseable(f"non-numeric rating {parsed['rating']!r}") from None
        if not 1 <= rating <= 10:
            raise JudgeUnparseable(f"rating {rating} outside 1..10")
        return JudgeVerdict(mode="single", rating=rating, explanation=explanation)

    verdict = str(parsed["verdict"]).strip()
    normalized = {"a": VERDICT_A, "b": VERDICT_B, "tie": VERDICT_TIE}.get(verdict.lower())
    if normalized is None:
        raise JudgeUnparseable(f"verdict {verdict!r} is not A, B, or Tie")
    return JudgeVerdict(mode="pairwise", verdict=normalized, explanation=explanation)


def _ask_judge(judge_backend: GenerationBackend, content: str) -> JudgeVerdict:
    last: JudgeUnparseable | None = None
    for attempt in range(1 + JUDGE_RETRIES):
        text = judge_backend.complete([{"role": "user", "content": content}])
        try:
            return parse_judge_json(text)
        except JudgeUnparseable as exc:
            last = exc
            logger.warning("judge response unparseable (attempt %d): %s", attempt + 1, exc)
    raise last


def judge_single(
    question: str,
    reference: str,
    answer: str,
    judge_backend: GenerationBackend,
    task: str = prompts.TASK_KNOWLEDGE,
    runs: int = 3,
) -> dict:
    """``runs`` independent 1-10 ratings and their mean."""
    content = prompts.render_single_judge_input(task, question, reference, answer)
    scores = []
    for _ in range(runs):
        verdict = _ask_judge(judge_backend, content)
        if verdict.mode != "single":
            raise JudgeUnparseable("expected a rating, got a pairwise verdict")
        scores.append(verdict.rating)
    return {"mean": float(np.mean(scores)), "scores": scores}


def _swap(verdict: str) -> str:
    return {VERDICT_A: VERDICT_B, VERDICT_B: VERDICT_A}.get(verdict, verdict)


def judge_pairwise(
    question: str,
    reference: str,
    answer_a: str,
    answer_b: str,
    judge_backend: GenerationBackend,
    task: str = prompts.TASK_KNOWLEDGE,
) -> JudgeVerdict:
    """Order-neutral pairwise verdict.

    The judge runs once per ordering; the swapped run's verdict is mapped
    back before comparison. Any disagreement yields Tie.
    """
    first = _ask_judge(
        judge_backend,
        prompts.render_pairwise_judge_input(task, question, reference, answer_a, answer_b),
    )
    second_raw = _ask_judge(
        judge_backend,
        prompts.render_pairwise_judge_input(task, question, reference, answer_b, answer_a),
    )
    for v in (first, second_raw):
        if v.mode != "pairwise":
            raise JudgeUnparseable("expected a verdict, got a rating")
    second = _swap(second_raw.verdict)
    final = first.verdict if first.verdict == second else VERDICT_TIE
    explanation = f"forward: {first.verdict}; reversed(mapped): {second}"
    return JudgeVerdict(mode="pairwise", verdict=final, explanation=explanation)


# --- ablation report --------------------------------------------------------------------


@dataclass(frozen=True)
class AblationConfig:
    his: bool
    ahns: bool

    @property
    def label(self) -> str:
        return f"HIS={'+' if self.his else '-'} AHNS={'+' if self.ahns else '-'}"


DEFAULT_ABLATION_GRID = (
    AblationConfig(False, False),
    AblationConfig(True, False),
    AblationConfig(False, True),
    AblationConfig(True, True),
)


@dataclass
class AblationReport:
    ks: tuple[int, ...]
    tasks: tuple[str, ...]
    seeds: tuple[int, ...]
    # cells[config_label][task][k] = mean acc over seeds
    cells: dict[str, dict[str, dict[int, float]]]
    untrained: dict[str, dict[int, float]]

    def to_json(self) -> str:
        return json.dumps(
            {
                "ks": list(self.ks),
                "tasks": list(self.tasks),
                "seeds": list(self.seeds),
                "cells": {
                    label: {task: {str(k): v for k, v in by_k.items()} for task, by_k in by_task.items()}
                    for label, by_task in self.cells.items()
                },
                "untrained": {
                    task: {str(k): v for k, v in by_k.items()}
                    for task, by_k in self.untrained.items()
                },
            },
            indent=2,
            sort_keys=True,
        )

    def to_text(self) -> str:
        header = ["config".ljust(18)] + [
            f"{task[:2]}@{k}".rjust(8) for task in self.tasks for k in self.ks
        ]
        lines = ["".join(header)]
        rows = [("untrained", self.untrained)] + [
            (label, by_task) for label, by_task in self.cells.items()
        ]
        for label, by_task in rows:
            cells = [label.ljust(18)]
            for task in self.tasks:
                for k in self.ks:
                    cells.append(f"{by_task[task][k]:.3f}".rjust(8))
            lines.append("".join(cells))
        return "\n".join(lines)


def run_ablation_report(
    chunks: Sequence[Chunk],
    train_pairs: Sequence[QAPair],
    eval_questions: Sequence[EvalQuestion],
    base_model_params: dict,
    train_config: TrainConfig,
    configs: Sequence[AblationConfig] = DEFAULT_ABLATION_GRID,
    ks: Sequence[int] = (1, 5, 20),
    seeds: Sequence[int] = (0,),
) -> AblationReport:
    """Train one encoder per (config, seed) from the same initial weights and
    evaluate top-k accuracy per task. Cells are means over seeds."""
    if not eval_questions:
        raise EmptyEvalSet("no questions to evaluate")
    tasks = tuple(sorted({q.task for q in eval_questions}))
    by_task = {t: [q for q in eval_questions if q.task == t] for t in tasks}
    ks = tuple(int(k) for k in ks)

    def eval_model(model: EncoderModel) -> dict[str, dict[int, float]]:
        idx = build_chunk_index(model, chunks)
        return {
            t: {k: acc_at_k(by_task[t], model, idx, k) for k in ks} for t in tasks
        }

    from dataclasses import replace as dc_replace

    untrained_accum = {t: {k: [] for k in ks} for t in tasks}
    cells: dict[str, dict[str, dict[int, list[float]]]] = {
        c.label: {t: {k: [] for k in ks} for t in tasks} for c in configs
    }
    for seed in seeds:
        base = EncoderModel.initialize(seed=seed, **base_model_params)
        base_scores = eval_model(base)
        for t in tasks:
            for k in ks:
                untrained_accum[t][k].append(base_scores[t][k])
        for config in configs:
            cfg = dc_replace(train_config, his=config.his, ahns=config.ahns, seed=seed)
            result = train(base, train_pairs, chunks, cfg)
            scores = eval_model(result.model)
            for t in tasks:
                for k in ks:
                    cells[config.label][t][k].append(scores[t][k])
            logger.info("ablation %s seed %d done", config.label, seed)

    mean_cells = {
        label: {t: {k: float(np.mean(v)) for k, v in by_k.items()} for t, by_k in by_task_.items()}
        for label, by_task_ in cells.items()
    }
    mean_untrained = {
        t: {k: float(np.mean(v)) for k, v in by_k.items()} for t, by_k in untrained_accum.items()
    }
    return AblationReport(
        ks=ks,
        tasks=tasks,
        seeds=tuple(seeds),
        cells=mean_cells,
        untrained=mean_untrained,
    )
