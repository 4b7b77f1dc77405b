import numpy as np
import pytest

from opsrag import index as vx
from opsrag.backends import MockChatBackend
from opsrag.encoder import EncoderModel, embed
from opsrag.errors import EmptyEvalSet, JudgeUnparseable
from opsrag.evaluation import (
    EvalQuestion,
    acc_at_k,
    judge_pairwise,
    judge_single,
    measure_latency,
    parse_judge_json,
    read_eval_set,
    write_eval_set,
)
from opsrag.prompts import TASK_KNOWLEDGE
from opsrag.training import build_chunk_index


@pytest.fixture(scope="module")
def planted():
    """Retriever setup with fully controlled ranks.

    Question i's gold is chunk g{i}; its embedding is planted so that the
    gold appears at a known rank in the search results.
    """
    model = EncoderModel.initialize(hash_dims=1 << 12, embed_dim=16, seed=0)
    return model


def question(q, gold):
    return EvalQuestion(
        question=q, task=TASK_KNOWLEDGE, gold_chunk_ids=gold, reference_answer="ref"
    )


class TestAccAtK:
    def test_oracle_retriever_scores_one(self, small_corpus):
        # A model + index where every eval question's gold chunk is its own
        # nearest neighbor: query text == chunk rendered text.
        model = EncoderModel.initialize(hash_dims=1 << 14, embed_dim=32, seed=1)
        index = build_chunk_index(model, small_corpus.chunks)
        questions = [
            question(chunk.rendered(), (chunk.id,)) for chunk in small_corpus.chunks[:20]
        ]
        for k in (1, 5, 20):
            assert acc_at_k(questions, model, index, k) == 1.0

    def test_null_retriever_scores_zero(self, small_corpus):
        model = EncoderModel.initialize(hash_dims=1 << 14, embed_dim=32, seed=1)
        index = build_chunk_index(model, small_corpus.chunks)
        questions = [
            question(chunk.rendered(), ("no-such-chunk",)) for chunk in small_corpus.chunks[:10]
        ]
        assert acc_at_k(questions, model, index, 5) == 0.0

    def test_known_rank_list(self):
        # Orthonormal chunks; each query is a rotation of its gold vector so
        # the gold lands at an exact known rank. acc@k then matches the
        # hand-computed fraction from the rank list.
        dim = 32
        basis = np.eye(dim)
        entries = [(f"g{i}", basis[i]) for i in range(10)]
        index = vx.build(entries)
        ranks = [1, 1, 3, 7, 9, 1, 2, 5, 10, 4]
        queries = []
        for i, rank in enumerate(ranks):
            # query closest to (rank-1) distractors, then the gold
            weights = np.zeros(dim)
            order = [j for j in range(10) if j != i][: rank - 1] + [i]
            for pos, j in enumerate(order):
                weights[j] = 1.0 - 0.05 * pos
            queries.append(weights / np.linalg.norm(weights))

        def acc_from_ranks(k):
            return sum(1 for r in ranks if r <= k) / len(ranks)

        for k in (1, 5, 20):
            hits = 0
            for i, q in enumerate(queries):
                got = {cid for cid, _ in vx.search(index, q, k)}
                if f"g{i}" in got:
                    hits += 1
            assert hits / len(ranks) == acc_from_ranks(k)

    def test_any_hit_semantics_with_multiple_golds(self, small_corpus):
        model = EncoderModel.initialize(hash_dims=1 << 14, embed_dim=32, seed=1)
        index = build_chunk_index(model, small_corpus.chunks)
        target = small_corpus.chunks[0]
        q = question(target.rendered(), ("definitely-missing", target.id))
        assert acc_at_k([q], model, index, 1) == 1.0

    def test_monotone_in_k(self, small_corpus):
        model = EncoderModel.initialize(hash_dims=1 << 14, embed_dim=32, seed=2)
        index = build_chunk_index(model, small_corpus.chunks)
        questions = small_corpus.eval_questions[:30]
        values = [acc_at_k(questions, model, index, k) for k in (1, 2, 5, 10, 20)]
        assert values == sorted(values)

    def test_empty_eval_set_rejected(self, small_corpus):
        model = EncoderModel.initialize(hash_dims=1 << 12, embed_dim=16, seed=0)
        index = build_chunk_index(model, small_corpus.chunks)
        with pytest.raises(EmptyEvalSet):
            acc_at_k([], model, index, 1)

    def test_eval_set_round_trip(self, tmp_path, small_corpus):
        path = tmp_path / "eval.jsonl"
        write_eval_set(small_corpus.eval_questions[:7], path)
        assert read_eval_set(path) == small_corpus.eval_questions[:7]


class TestLatency:
    def test_stats_shape_and_order(self, small_corpus):
        model = EncoderModel.initialize(hash_dims=1 << 14, embed_dim=32, seed=0)
        index = build_chunk_index(model, small_corpus.chunks)
        queries = [q.question for q in small_corpus.eval_questions[:10]]
        stats = measure_latency(index, model, queries, k=5, repetitions=2)
        assert set(stats) == {"mean_ms", "p50_ms", "p95_ms"}
        assert 0 < stats["p50_ms"] <= stats["p95_ms"]
        assert stats["mean_ms"] <= stats["p95_ms"]

    def test_larger_k_not_cheaper_beyond_noise(self, small_corpus):
        model = EncoderModel.initialize(hash_dims=1 << 14, embed_dim=32, seed=0)
        index = build_chunk_index(model, small_corpus.chunks)
        queries = [q.question for q in small_corpus.eval_questions[:10]]
        small_k = measure_latency(index, model, queries, k=1, repetitions=3)
        large_k = measure_latency(index, model, queries, k=20, repetitions=3)
        assert large_k["p50_ms"] >= small_k["p50_ms"] * 0.8  # 20% noise tolerance

    def test_repetitions_validated(self, small_corpus):
        model = EncoderModel.initialize(hash_dims=1 << 12, embed_dim=16, seed=0)
        index = build_chunk_index(model, small_corpus.chunks)
        with pytest.raises(ValueError):
            measure_latency(index, model, ["q"], k=1, repetitions=0)


class TestParseJudgeJson:
    def test_fenced_rating(self, fixtures_dir):
        text = (fixtures_dir / "judge" / "single_fenced.txt").read_text()
        verdict = parse_judge_json(text)
        assert verdict.mode == "single" and verdict.rating == 7
        assert "reference" in verdict.explanation

    def test_prose_then_bare_json(self, fixtures_dir):
        text = (fixtures_dir / "judge" / "single_prose_then_json.txt").read_text()
        assert parse_judge_json(text).rating == 6

    def test_pairwise_fixtures(self, fixtures_dir):
        cases = {
            "pairwise_fenced.txt": "A",
            "pairwise_bare.txt": "B",
            "pairwise_tie.txt": "Tie",
        }
        for name, expected in cases.items():
            text = (fixtures_dir / "judge" / name).read_text()
            verdict = parse_judge_json(text)
            assert verdict.mode == "pairwise" and verdict.verdict == expected

    def test_integer_rating_accepted(self):
        assert parse_judge_json('{"rating": 9, "explanation": "x"}').rating == 9

    def test_out_of_range_rating_rejected(self):
        with pytest.raises(JudgeUnparseable):
            parse_judge_json('{"rating": "11", "explanation": "x"}')
        with pytest.raises(JudgeUnparseable):
            parse_judge_json('{"rating": "0"}')

    def test_unknown_verdict_rejected(self):
        with pytest.raises(JudgeUnparseable):
            parse_judge_json('{"verdict": "C", "explanation": "x"}')

    def test_no_json_rejected(self):
        with pytest.raises(JudgeUnparseable):
            parse_judge_json("no structured output at all")

    def test_last_object_wins(self):
        text = '{"rating": "3"} then revised: {"rating": "8"}'
        assert parse_judge_json(text).rating == 8


def scripted_judge(responses):
    return MockChatBackend.scripted(
        [f'```json\n{{"rating": "{r}", "explanation": "e"}}\n```' for r in responses]
    )


class TestJudgeSingle:
    def test_three_runs_averaged(self):
        judge = scripted_judge([6, 7, 8])
        out = judge_single("q", "ref", "ans", judge, runs=3)
        assert out["scores"] == [6, 7, 8]
        assert out["mean"] == pytest.approx(7.0)
        assert len(judge.calls) == 3

    def test_mean_within_score_range(self):
        judge = scripted_judge([3, 9, 5])
        out = judge_single("q", "ref", "ans", judge)
        assert min(out["scores"]) <= out["mean"] <= max(out["scores"])

    def test_retry_budget_recovers(self):
        judge = MockChatBackend.scripted(
            ["garbage", "still garbage", '{"rating": "5", "explanation": "ok"}']
        )
        out = judge_single("q", "ref", "ans", judge, runs=1)
        assert out["scores"] == [5]

    def test_exhausted_retries_raise(self):
        judge = MockChatBackend.scripted(["junk"] * 3)
        with pytest.raises(JudgeUnparseable):
            judge_single("q", "ref", "ans", judge, runs=1)

    def test_task_prompt_selected(self):
        judge = scripted_judge([7, 7, 7])
        judge_single("q", "ref", "ans", judge, task="troubleshooting")
        assert "solution field worth 4 points" in judge.calls[0][0]["content"]


def pairwise_response(verdict):
    return f'```json\n{{"verdict": "{verdict}", "explanation": "e"}}\n```'


class TestJudgePairwise:
    def test_agreement_on_a(self):
        # Forward order says A; swapped order says B, which maps back to A.
        judge = MockChatBackend.scripted([pairwise_response("A"), pairwise_response("B")])
        assert judge_pairwise("q", "ref", "ans a", "ans b", judge).verdict == "A"

    def test_disagreement_collapses_to_tie(self):
        judge = MockChatBackend.scripted([pairwise_response("A"), pairwise_response("A")])
        assert judge_pairwise("q", "ref", "ans a", "ans b", judge).verdict == "Tie"

    def test_tie_both_ways_stays_tie(self):
        judge = MockChatBackend.scripted([pairwise_response("Tie"), pairwise_response("Tie")])
        assert judge_pairwise("q", "ref", "ans a", "ans b", judge).verdict == "Tie"

    def test_order_symmetry(self):
        # A deterministic judge that always prefers the answer containing
        # "good": swapping the candidate order must swap the verdict.
        def prefer_good(messages):
            content = messages[0]["content"]
            a_text = content.split("[Assistant A's Answer]\n")[1].split("\n\n[")[0]
            return pairwise_response("A" if "good" in a_text else "B")

        judge = MockChatBackend(prefer_good)
        forward = judge_pairwise("q", "ref", "good answer", "bad answer", judge)
        backward = judge_pairwise("q", "ref", "bad answer", "good answer", judge)
        assert forward.verdict == "A" and backward.verdict == "B"

    def test_two_calls_issued(self):
        judge = MockChatBackend.scripted([pairwise_response("Tie"), pairwise_response("Tie")])
        judge_pairwise("q", "ref", "a", "b", judge)
        assert len(judge.calls) == 2
