"""Seeded synthetic IT-operations corpus with topic-cluster structure.

Each topic owns disjoint document-side and query-side vocabularies, so an
untrained lexical encoder cannot match questions to their documents beyond a
deliberately planted service-name word; training has to learn the mapping.
Topics split into "guide" documents (knowledge-acquisition targets) and
"incident" documents (troubleshooting targets), giving the two tasks
different retrieval subspaces.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .chunking import Chunk, chunk_targeted
from .cleaning import clean_text
from .distill import TASK_QAK_GPT, TASK_QAK_LOG, TASK_QAT_LOG, QAPair
from .documents import Document, parse_document
from .evaluation import EvalQuestion
from .prompts import TASK_KNOWLEDGE, TASK_TROUBLESHOOTING

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _make_words(rng: random.Random, count: int, taken: set[str]) -> list[str]:
    words = []
    while len(words) < count:
        n_syll = rng.randint(3, 4)
        word = "".join(
            rng.choice(_CONSONANTS) + rng.choice(_VOWELS) for _ in range(n_syll)
        )
        if word in taken:
            continue
        taken.add(word)
        words.append(word)
    return words


@dataclass
class SyntheticCorpus:
    markups: list[tuple[str, str]]  # (doc_id, markup text)
    documents: list[Document]
    chunks: list[Chunk]
    train_pairs: list[QAPair]
    eval_questions: list[EvalQuestion]


def _sentence(rng: random.Random, pool: list[str], length: int) -> str:
    words = [rng.choice(pool) for _ in range(length)]
    words[0] = words[0].capitalize()
    return " ".join(words) + "."


def make_synthetic_corpus(
    n_docs: int = 200,
    n_topics: int = 20,
    seed: int = 0,
    guide_fraction: float = 0.6,
    max_tokens: int = 800,
    min_tokens: int = 20,
) -> SyntheticCorpus:
    """Build documents, chunks, training pairs, and an eval set.

    Everything is a pure function of the arguments; identical seeds yield
    byte-identical corpora.
    """
    if n_docs % n_topics != 0:
        raise ValueError("n_docs must be a multiple of n_topics")
    rng = random.Random(seed)
    taken: set[str] = set()
    fillers = _make_words(rng, 12, taken)
    docs_per_topic = n_docs // n_topics
    n_guides = max(1, round(docs_per_topic * guide_fraction))

    markups: list[tuple[str, str]] = []
    documents: list[Document] = []
    chunks: list[Chunk] = []
    train_pairs: list[QAPair] = []
    eval_questions: list[EvalQuestion] = []

    for t in range(n_topics):
        topic_doc_words = _make_words(rng, 6, taken)
        topic_query_words = _make_words(rng, 6, taken)
        service_name = topic_doc_words[0]  # appears in questions too

        for i in range(docs_per_topic):
            is_guide = i < n_guides
            doc_doc_words = _make_words(rng, 4, taken)
            doc_query_words = _make_words(rng, 4, taken)
            doc_id = f"{'guide' if is_guide else 'incident'}-{t:02d}-{i:02d}"

            if is_guide:
                # Shared style anchors ("operations documentation", "procedure")
                # let queries find the right task family lexically; only the
                # topic/doc identity has to be learned.
                body_pool = topic_doc_words + doc_doc_words + fillers
                title = f"{service_name} {doc_doc_words[0]} operations guide"
                para1 = " ".join(_sentence(rng, body_pool, rng.randint(8, 12)) for _ in range(3))
                para2 = " ".join(_sentence(rng, body_pool, rng.randint(8, 12)) for _ in range(3))
                markup = (
                    f"# {title}\n\n"
                    f"This operations documentation describes the standard procedure. {para1}\n\n"
                    f"## Details\n\n{para2}\n"
                )
            else:
                # Incident runbooks carry no topic/service vocabulary: error
                # logs are their own discourse domain.
                body_pool = doc_doc_words + fillers
                title = f"incident {doc_doc_words[0]} runbook"
                code = rng.randrange(16**6)
                scenario = _sentence(rng, body_pool, rng.randint(8, 12))
                localization = _sentence(rng, body_pool, rng.randint(8, 12))
                solution = " ".join(
                    _sentence(rng, body_pool, rng.randint(8, 12)) for _ in range(2)
                )
                markup = (
                    f"# {title}\n\n"
                    f"ERROR 0x{code:06x} failure observed, retry exhausted.\n\n"
                    f"Scenario: {scenario}\n\n"
                    f"Problem localization: {localization}\n\n"
                    f"Solution: {solution}\n"
                )

            doc = clean_text(parse_document(markup, doc_id=doc_id))
            doc_chunks = chunk_targeted(doc, max_tokens=max_tokens, min_tokens=min_tokens)
            gold_id = doc_chunks[0].id
            markups.append((doc_id, markup))
            documents.append(doc)
            chunks.extend(doc_chunks)

            def ka_question() -> str:
                picks = rng.sample(doc_query_words, 3) + rng.sample(topic_query_words, 2)
                rng.shuffle(picks)
                return (
                    f"What does the operations documentation procedure say about "
                    f"{picks[0]} {picks[1]} and {picks[2]} behavior of {service_name} "
                    f"when {picks[3]} {rng.choice(fillers)} {picks[4]} occurs?"
                )

            def ts_question() -> str:
                # No topic/service vocabulary: error logs and documentation
                # questions are disjoint discourse domains, as in real ops data.
                picks = rng.sample(doc_query_words, 3)
                code = rng.randrange(16**6)
                return (
                    f"ERROR 0x{code:06x}: component reported {picks[0]} "
                    f"{picks[1]} failure, module {picks[2]} {rng.choice(fillers)} "
                    f"retry exhausted"
                )

            if is_guide:
                reference = _sentence(rng, body_pool, 10)
                for task in (TASK_QAK_GPT, TASK_QAK_GPT, TASK_QAK_LOG):
                    train_pairs.append(
                        QAPair(
                            question=ka_question(),
                            answer=_sentence(rng, body_pool, rng.randint(6, 10)),
                            task=task,
                            gold_chunk_ids=(gold_id,),
                        )
                    )
                eval_questions.append(
                    EvalQuestion(
                        question=ka_question(),
                        task=TASK_KNOWLEDGE,
                        gold_chunk_ids=(gold_id,),
                        reference_answer=reference,
                    )
                )
            else:
                reference = (
                    f"Scenario: {_sentence(rng, body_pool, 6)} "
                    f"Solution: {_sentence(rng, body_pool, 8)}"
                )
                for _ in range(2):
                    train_pairs.append(
                        QAPair(
                            question=ts_question(),
                            answer=_sentence(rng, body_pool, rng.randint(8, 12)),
                            task=TASK_QAT_LOG,
                            gold_chunk_ids=(gold_id,),
                        )
                    )
                eval_questions.append(
                    EvalQuestion(
                        question=ts_question(),
                        task=TASK_TROUBLESHOOTING,
                        gold_chunk_ids=(gold_id,),
                        reference_answer=reference,
                    )
                )

    return SyntheticCorpus(
        markups=markups,
        documents=documents,
        chunks=chunks,
        train_pairs=train_pairs,
        eval_questions=eval_questions,
    )
