from opsrag.prompts import TASK_KNOWLEDGE, TASK_TROUBLESHOOTING
from opsrag.synthetic import make_synthetic_corpus


def test_deterministic_for_fixed_seed():
    a = make_synthetic_corpus(n_docs=20, n_topics=4, seed=3)
    b = make_synthetic_corpus(n_docs=20, n_topics=4, seed=3)
    assert a.markups == b.markups
    assert a.train_pairs == b.train_pairs
    assert a.eval_questions == b.eval_questions


def test_seed_changes_content():
    a = make_synthetic_corpus(n_docs=20, n_topics=4, seed=3)
    b = make_synthetic_corpus(n_docs=20, n_topics=4, seed=4)
    assert a.markups != b.markups


def test_shapes(small_corpus):
    assert len(small_corpus.markups) == 40
    assert len(small_corpus.documents) == 40
    assert len(small_corpus.chunks) >= 40
    assert {q.task for q in small_corpus.eval_questions} == {
        TASK_KNOWLEDGE,
        TASK_TROUBLESHOOTING,
    }


def test_gold_ids_resolve(small_corpus):
    ids = {c.id for c in small_corpus.chunks}
    for pair in small_corpus.train_pairs:
        assert set(pair.gold_chunk_ids) <= ids
    for q in small_corpus.eval_questions:
        assert set(q.gold_chunk_ids) <= ids


def test_task_vocabularies_disjoint(small_corpus):
    # Troubleshooting questions must not leak guide-document vocabulary.
    guide_words = set()
    for doc_id, markup in small_corpus.markups:
        if doc_id.startswith("guide"):
            guide_words |= set(markup.lower().split())
    for q in small_corpus.eval_questions:
        if q.task == TASK_TROUBLESHOOTING:
            overlap = {
                w for w in q.question.lower().split() if w in guide_words and len(w) > 8
            }
            assert not overlap


def test_chunks_within_bounds(small_corpus):
    assert all(c.token_count <= 800 for c in small_corpus.chunks)
    assert all(c.token_count >= 20 for c in small_corpus.chunks)
