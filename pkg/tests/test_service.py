import concurrent.futures

import pytest
from fastapi.testclient import TestClient

from opsrag import index as vx
from opsrag.backends import MockChatBackend, offline_handler
from opsrag.chunking import write_chunks
from opsrag.encoder import EncoderModel, save_model
from opsrag.errors import MissingArtifacts
from opsrag.service import RagService, ServiceConfig, create_app, load_service
from opsrag.training import build_chunk_index


@pytest.fixture(scope="module")
def service(small_corpus):
    model = EncoderModel.initialize(hash_dims=1 << 14, embed_dim=32, seed=0)
    index = build_chunk_index(model, small_corpus.chunks)
    return RagService(
        encoder=model,
        index=index,
        chunks={c.id: c for c in small_corpus.chunks},
        backend=MockChatBackend(offline_handler),
        default_k=5,
    )


@pytest.fixture(scope="module")
def client(service):
    return TestClient(create_app(service))


class TestEndpoints:
    def test_healthz(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        assert resp.text == "ok"

    def test_query_contract(self, client):
        resp = client.post(
            "/v1/query",
            json={"question": "What is the procedure?", "task": "knowledge_acquisition"},
        )
        assert resp.status_code == 200
        body = resp.json()
        assert set(body) == {"answer", "chunks", "retrieval_ms", "generation_ms", "session_id"}
        assert len(body["chunks"]) == 5
        assert all(set(c) == {"id", "score", "text"} for c in body["chunks"])

    def test_query_top_k_override(self, client):
        resp = client.post(
            "/v1/query",
            json={"question": "q", "task": "troubleshooting", "top_k": 2},
        )
        assert len(resp.json()["chunks"]) == 2

    def test_query_unknown_task_rejected(self, client):
        resp = client.post("/v1/query", json={"question": "q", "task": "bogus"})
        assert resp.status_code == 422

    def test_query_empty_question_rejected(self, client):
        resp = client.post("/v1/query", json={"question": "", "task": "knowledge_acquisition"})
        assert resp.status_code == 422

    def test_retrieve(self, client):
        resp = client.post("/v1/retrieve", json={"question": "anything", "top_k": 3})
        assert resp.status_code == 200
        chunks = resp.json()["chunks"]
        assert len(chunks) == 3
        scores = [c["score"] for c in chunks]
        assert scores == sorted(scores, reverse=True)

    def test_retrieve_consistent_with_query_citations(self, client):
        q = "where are the runbooks kept?"
        retrieved = client.post("/v1/retrieve", json={"question": q, "top_k": 4}).json()
        answered = client.post(
            "/v1/query", json={"question": q, "task": "knowledge_acquisition", "top_k": 4}
        ).json()
        assert [c["id"] for c in retrieved["chunks"]] == [c["id"] for c in answered["chunks"]]

    def test_get_chunk(self, client, small_corpus):
        chunk = small_corpus.chunks[0]
        resp = client.get(f"/v1/chunks/{chunk.id}")
        assert resp.status_code == 200
        body = resp.json()
        assert body["id"] == chunk.id
        assert body["body"] == chunk.body
        assert body["token_count"] == chunk.token_count

    def test_get_missing_chunk_404(self, client):
        resp = client.get("/v1/chunks/not-a-chunk")
        assert resp.status_code == 404
        assert resp.json()["error"]["type"] == "KeyError"


class TestConcurrency:
    def test_32_concurrent_queries_match_serial(self, client):
        questions = [f"question number {i} about procedure" for i in range(32)]

        def ask(q):
            resp = client.post(
                "/v1/query", json={"question": q, "task": "knowledge_acquisition", "top_k": 3}
            )
            assert resp.status_code == 200
            body = resp.json()
            return body["answer"], [c["id"] for c in body["chunks"]]

        serial = [ask(q) for q in questions]
        with concurrent.futures.ThreadPoolExecutor(max_workers=16) as pool:
            concurrent_results = list(pool.map(ask, questions))
        assert concurrent_results == serial


class TestLoadService:
    def test_loads_from_artifacts(self, small_corpus, tmp_path):
        model = EncoderModel.initialize(hash_dims=1 << 12, embed_dim=16, seed=0)
        index = build_chunk_index(model, small_corpus.chunks)
        save_model(model, tmp_path / "m.rgem")
        vx.save_index(index, tmp_path / "i.rgix")
        write_chunks(small_corpus.chunks, tmp_path / "c.jsonl")
        cfg = ServiceConfig(
            model_path=tmp_path / "m.rgem",
            index_path=tmp_path / "i.rgix",
            chunk_store_path=tmp_path / "c.jsonl",
        )
        service = load_service(cfg)
        client = TestClient(create_app(service))
        assert client.get("/healthz").status_code == 200
        resp = client.post("/v1/retrieve", json={"question": "q", "top_k": 1})
        assert resp.status_code == 200

    def test_missing_artifacts_rejected(self, tmp_path):
        cfg = ServiceConfig(
            model_path=tmp_path / "absent.rgem",
            index_path=tmp_path / "absent.rgix",
            chunk_store_path=tmp_path / "absent.jsonl",
        )
        with pytest.raises(MissingArtifacts):
            load_service(cfg)
