"""HTTP serving layer over the online QA process.

Endpoints: POST /v1/query, POST /v1/retrieve, GET /v1/chunks/{id},
GET /healthz. The encoder, index, and chunk store are loaded once and shared
as immutable snapshots, so request handling is freely concurrent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from . import index as vindex
from . import prompts, runtime
from .backends import GenerationBackend, make_backend
from .chunking import Chunk, read_chunks
from .encoder import EncoderModel, embed, load_model
from .errors import BackendUnavailable, EmptyIndex, MissingArtifacts, OpsRagError


@dataclass
class ServiceConfig:
    model_path: Path
    index_path: Path
    chunk_store_path: Path
    backend: object = "mock"  # passed to make_backend
    default_k: int = 5
    allow_zero_context: bool = False
    host: str = "127.0.0.1"
    port: int = 8080
    cors_origins: tuple[str, ...] = ("*",)


@dataclass
class RagService:
    encoder: EncoderModel
    index: vindex.VectorIndex
    chunks: dict[str, Chunk]
    backend: GenerationBackend
    default_k: int = 5
    allow_zero_context: bool = False
    cors_origins: tuple[str, ...] = field(default=("*",))


def load_service(config: ServiceConfig) -> RagService:
    for path in (config.model_path, config.index_path, config.chunk_store_path):
        if not Path(path).exists():
            raise MissingArtifacts(f"required artifact missing: {path}")
    chunks = {c.id: c for c in read_chunks(config.chunk_store_path)}
    return RagService(
        encoder=load_model(config.model_path),
        index=vindex.load_index(config.index_path),
        chunks=chunks,
        backend=make_backend(config.backend),
        default_k=config.default_k,
        allow_zero_context=config.allow_zero_context,
        cors_origins=tuple(config.cors_origins),
    )


class QueryRequest(BaseModel):
    question: str = Field(min_length=1)
    task: str = prompts.TASK_KNOWLEDGE
    top_k: int | None = Field(default=None, ge=1)
    session_id: str | None = None


class RetrieveRequest(BaseModel):
    question: str = Field(min_length=1)
    top_k: int = Field(default=5, ge=1)


def _error_response(status: int, exc: Exception) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"error": {"type": type(exc).__name__, "message": str(exc)}},
    )


def create_app(service: RagService) -> FastAPI:
    app = FastAPI(title="opsrag", version="0.1.0")
    if service.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(service.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(OpsRagError)
    async def _handle_domain_error(_request, exc: OpsRagError):
        if isinstance(exc, BackendUnavailable):
            return _error_response(502, exc)
        if isinstance(exc, EmptyIndex):
            return _error_response(409, exc)
        return _error_response(400, exc)

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz() -> str:
        return "ok"

    @app.post("/v1/query")
    def query(req: QueryRequest):
        if req.task not in prompts.TASKS:
            return _error_response(422, ValueError(f"unknown task {req.task!r}"))
        record = runtime.answer(
            question=req.question,
            task=req.task,
            k=req.top_k or service.default_k,
            encoder=service.encoder,
            index=service.index,
            backend=service.backend,
            chunk_lookup=service.chunks,
            session_id=req.session_id,
            allow_zero_context=service.allow_zero_context,
        )
        return {
            "answer": record.answer,
            "chunks": [
                {"id": c.id, "score": c.score, "text": c.text} for c in record.cited_chunks
            ],
            "retrieval_ms": record.retrieval_ms,
            "generation_ms": record.generation_ms,
            "session_id": record.session_id,
        }

    @app.post("/v1/retrieve")
    def retrieve(req: RetrieveRequest):
        if service.index.size == 0:
            return _error_response(409, EmptyIndex("index is empty"))
        query_vec = embed(service.encoder, req.question)
        results = vindex.search(service.index, query_vec, req.top_k)
        return {
            "chunks": [
                {"id": cid, "score": score, "text": service.chunks[cid].rendered()}
                for cid, score in results
            ]
        }

    @app.get("/v1/chunks/{chunk_id}")
    def get_chunk(chunk_id: str):
        chunk = service.chunks.get(chunk_id)
        if chunk is None:
            return _error_response(404, KeyError(f"no chunk with id {chunk_id!r}"))
        return {
            "id": chunk.id,
            "doc_id": chunk.doc_id,
            "title_path": list(chunk.title_path),
            "body": chunk.body,
            "token_count": chunk.token_count,
            "method": chunk.method,
        }

    return app


def serve(config: ServiceConfig) -> None:
    """Blocking entry point: load artifacts and run the HTTP server."""
    import uvicorn

    app = create_app(load_service(config))
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
