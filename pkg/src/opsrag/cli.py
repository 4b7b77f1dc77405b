"""Command-line pipeline orchestration.

Stages run serially and each writes its artifact plus a run manifest of
content hashes. Exit codes: 0 success, 1 stage failure, 2 config error.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import index as vindex
from .backends import make_backend
from .chunking import chunk_targeted, read_chunks, write_chunks
from .cleaning import clean_text
from .config import PipelineConfig, load_config, write_manifest
from .distill import (
    TASK_QAK_LOG,
    TASK_QAT_LOG,
    combine_datasets,
    generate_qa,
    read_qa_pairs,
    rewrite_questions,
    write_qa_pairs,
)
from .documents import document_from_record, document_to_record, parse_document
from .encoder import EncoderModel, load_model, save_model
from .errors import ConfigError, OpsRagError, StageFailure
from .evaluation import (
    DEFAULT_ABLATION_GRID,
    acc_at_k,
    judge_single,
    measure_latency,
    read_eval_set,
    run_ablation_report,
    write_eval_set,
)
from .prompts import TASK_KNOWLEDGE, TASK_TROUBLESHOOTING
from .runtime import build_raft_dataset, write_raft_dataset
from .training import TrainConfig, train

logger = logging.getLogger(__name__)

_TASK_CHOICES = {"ka": (TASK_KNOWLEDGE,), "ts": (TASK_TROUBLESHOOTING,), "both": (TASK_KNOWLEDGE, TASK_TROUBLESHOOTING)}


def _load(ctx) -> PipelineConfig:
    params = ctx.obj
    cfg = load_config(params["config"], overrides={"seed": params["seed"], "backend": params["backend"]})
    cfg.workdir.mkdir(parents=True, exist_ok=True)
    return cfg


def stage(fn):
    """Wrap a subcommand: map ConfigError -> exit 2, other failures -> exit 1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(2)
        except OpsRagError as exc:
            click.echo(f"stage failed: {type(exc).__name__}: {exc}", err=True)
            sys.exit(1)
        except Exception as exc:  # surface module errors verbatim
            click.echo(f"stage failed: {StageFailure(str(exc))!r}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.option("--config", "config_path", default="opsrag.yaml", show_default=True, help="Pipeline config file.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--backend", default=None, help="Generation backend URL (or 'mock').")
@click.option("-v", "--verbose", is_flag=True, help="Enable info logging.")
@click.pass_context
def main(ctx, config_path, seed, backend, verbose):
    """End-to-end retrieval-augmented QA pipeline for ops corpora."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"config": config_path, "seed": seed, "backend": backend}


@main.command()
@click.pass_context
@stage
def ingest(ctx):
    """Parse and clean every markup file in the corpus directory."""
    cfg = _load(ctx)
    sources = sorted(cfg.corpus_dir.glob("*.md")) + sorted(cfg.corpus_dir.glob("*.txt"))
    if not sources:
        raise ConfigError(f"no .md/.txt sources in {cfg.corpus_dir}")
    with open(cfg.docs_path, "w", encoding="utf-8") as f:
        for src in sources:
            doc = clean_text(parse_document(src.read_text(encoding="utf-8"), doc_id=src.stem))
            f.write(json.dumps(document_to_record(doc), ensure_ascii=False))
            f.write("\n")
    write_manifest(cfg, "ingest", {s.name: s for s in sources}, {"documents": cfg.docs_path})
    click.echo(f"ingested {len(sources)} documents -> {cfg.docs_path}")


@main.command()
@click.pass_context
@stage
def chunk(ctx):
    """Chunk ingested documents into the JSON-lines chunk store."""
    cfg = _load(ctx)
    chunks = []
    with open(cfg.docs_path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                doc = document_from_record(json.loads(line))
                chunks.extend(
                    chunk_targeted(
                        doc,
                        max_tokens=cfg.chunking.max_tokens,
                        min_tokens=cfg.chunking.min_tokens,
                        overlap_tokens=cfg.chunking.overlap_tokens,
                    )
                )
    write_chunks(chunks, cfg.chunks_path)
    write_manifest(cfg, "chunk", {"documents": cfg.docs_path}, {"chunks": cfg.chunks_path})
    click.echo(f"wrote {len(chunks)} chunks -> {cfg.chunks_path}")


@main.command()
@click.pass_context
@stage
def distill(ctx):
    """Generate QA pairs from chunks; rewrite log-derived questions."""
    cfg = _load(ctx)
    backend = make_backend(cfg.backend)
    escalation = make_backend(cfg.escalation_backend, tier="escalation")
    chunks = read_chunks(cfg.chunks_path)
    generated = []
    for c in chunks:
        generated.extend(generate_qa(c, backend, escalation))
    write_qa_pairs(generated, cfg.qak_gpt_path)
    outputs = {"qak_gpt": cfg.qak_gpt_path}
    inputs = {"chunks": cfg.chunks_path}

    for name in ("qak_log", "qat_log"):
        raw_path = cfg.corpus_dir / f"{name}.jsonl"
        if raw_path.exists():
            pairs = read_qa_pairs(raw_path)
            rewritten, flagged = rewrite_questions(pairs, backend)
            if flagged:
                click.echo(f"{name}: {len(flagged)} rewrites unchanged", err=True)
            out = cfg.workdir / f"{name}.rewritten.jsonl"
            write_qa_pairs(rewritten, out)
            inputs[name] = raw_path
            outputs[f"{name}_rewritten"] = out
    write_manifest(cfg, "distill", inputs, outputs)
    click.echo(f"distilled {len(generated)} QA pairs -> {cfg.qak_gpt_path}")


@main.command()
@click.pass_context
@stage
def combine(ctx):
    """Merge QA sources into the encoder/LLM fine-tuning datasets."""
    cfg = _load(ctx)
    chunks = read_chunks(cfg.chunks_path)

    def read_if_exists(path: Path):
        return read_qa_pairs(path) if path.exists() else []

    qak_log = read_if_exists(cfg.workdir / "qak_log.rewritten.jsonl") or read_if_exists(
        cfg.corpus_dir / "qak_log.jsonl"
    )
    qat_log = read_if_exists(cfg.workdir / "qat_log.rewritten.jsonl") or read_if_exists(
        cfg.corpus_dir / "qat_log.jsonl"
    )
    qak_gpt = read_if_exists(cfg.qak_gpt_path)
    combined = combine_datasets(chunks, qak_log, qak_gpt, qat_log)
    write_qa_pairs(combined.data_em, cfg.data_em_path)
    write_qa_pairs(combined.data_llm, cfg.data_llm_path)
    write_manifest(
        cfg,
        "combine",
        {"chunks": cfg.chunks_path, "qak_gpt": cfg.qak_gpt_path},
        {"data_em": cfg.data_em_path, "data_llm": cfg.data_llm_path},
    )
    click.echo(f"combined {len(combined.data_em)} pairs -> {cfg.data_em_path}")


@main.command("train-embed")
@click.pass_context
@stage
def train_embed(ctx):
    """Contrastively fine-tune the encoder on the combined dataset."""
    cfg = _load(ctx)
    chunks = read_chunks(cfg.chunks_path)
    pairs = read_qa_pairs(cfg.data_em_path)
    model = EncoderModel.initialize(
        hash_dims=cfg.encoder.hash_dims,
        ngram_range=(cfg.encoder.ngram_min, cfg.encoder.ngram_max),
        embed_dim=cfg.encoder.embed_dim,
        temperature=cfg.encoder.temperature,
        seed=cfg.seed,
    )
    tcfg = TrainConfig(
        epochs=cfg.training.epochs,
        lr=cfg.training.lr,
        batch_size=cfg.training.batch_size,
        hard_neg_k=cfg.training.hard_neg_k,
        hard_neg_m=cfg.training.hard_neg_m,
        seed=cfg.seed,
        his=cfg.training.his,
        ahns=cfg.training.ahns,
        negative_pool=cfg.training.negative_pool,
        refresh_negatives=cfg.training.refresh_negatives,
    )
    result = train(model, pairs, chunks, tcfg)
    save_model(result.model, cfg.model_path)
    write_manifest(
        cfg,
        "train-embed",
        {"chunks": cfg.chunks_path, "data_em": cfg.data_em_path},
        {"model": cfg.model_path},
    )
    losses = ", ".join(f"{x:.4f}" for x in result.epoch_losses)
    click.echo(f"trained encoder ({len(pairs)} pairs; epoch losses: {losses}) -> {cfg.model_path}")


@main.command("index")
@click.pass_context
@stage
def index_cmd(ctx):
    """Embed all chunks and build the vector index plus its sidecar."""
    cfg = _load(ctx)
    model = load_model(cfg.model_path)
    chunks = read_chunks(cfg.chunks_path)
    from .encoder import encode_texts

    embeddings = encode_texts(model, [c.rendered() for c in chunks])
    idx = vindex.build(
        [(c.id, embeddings[i]) for i, c in enumerate(chunks)],
        mode=cfg.index.mode,
        nlist=cfg.index.nlist,
        nprobe=cfg.index.nprobe,
        seed=cfg.seed,
    )
    vindex.save_index(idx, cfg.index_path)
    with open(cfg.sidecar_path, "w", encoding="utf-8") as f:
        for c in chunks:
            rec = {
                "id": c.id,
                "doc_id": c.doc_id,
                "title_path": list(c.title_path),
                "token_count": c.token_count,
                "method": c.method,
            }
            f.write(json.dumps(rec, ensure_ascii=False))
            f.write("\n")
    write_manifest(
        cfg,
        "index",
        {"model": cfg.model_path, "chunks": cfg.chunks_path},
        {"index": cfg.index_path, "sidecar": cfg.sidecar_path},
    )
    click.echo(f"indexed {idx.size} vectors ({idx.mode}) -> {cfg.index_path}")


@main.command("raft-build")
@click.pass_context
@stage
def raft_build(ctx):
    """Attach top-k retrieved chunks to every fine-tuning pair."""
    cfg = _load(ctx)
    model = load_model(cfg.model_path)
    idx = vindex.load_index(cfg.index_path)
    chunks = {c.id: c for c in read_chunks(cfg.chunks_path)}
    pairs = read_qa_pairs(cfg.data_llm_path)
    examples = build_raft_dataset(pairs, model, idx, cfg.raft_k, chunks)
    write_raft_dataset(examples, cfg.raft_path)
    write_manifest(
        cfg,
        "raft-build",
        {"model": cfg.model_path, "index": cfg.index_path, "data_llm": cfg.data_llm_path},
        {"raft": cfg.raft_path},
    )
    click.echo(f"wrote {len(examples)} retrieval-augmented examples -> {cfg.raft_path}")


@main.command()
@click.pass_context
@stage
def serve(ctx):
    """Run the HTTP QA service over the built artifacts."""
    cfg = _load(ctx)
    from .service import ServiceConfig, serve as run_service

    run_service(
        ServiceConfig(
            model_path=cfg.model_path,
            index_path=cfg.index_path,
            chunk_store_path=cfg.chunks_path,
            backend=cfg.backend,
            default_k=cfg.serve.default_k,
            allow_zero_context=cfg.serve.allow_zero_context,
            host=cfg.serve.host,
            port=cfg.serve.port,
        )
    )


@main.command()
@click.argument("metric", type=click.Choice(["acc", "latency", "judge", "ablation"]))
@click.option("--k", "k_list", default=None, help="Comma-separated k values (e.g. 1,5,20).")
@click.option("--task", "task_filter", type=click.Choice(["ka", "ts", "both"]), default="both", show_default=True)
@click.pass_context
@stage
def eval(ctx, metric, k_list, task_filter):
    """Evaluate retrieval accuracy, latency, judge scores, or the ablation grid."""
    cfg = _load(ctx)
    ks = tuple(int(x) for x in k_list.split(",")) if k_list else tuple(cfg.eval.k_values)
    tasks = _TASK_CHOICES[task_filter]
    questions = [q for q in read_eval_set(cfg.eval_set_path) if q.task in tasks]
    chunks = read_chunks(cfg.chunks_path)

    if metric == "ablation":
        pairs = read_qa_pairs(cfg.data_em_path)
        report = run_ablation_report(
            chunks,
            pairs,
            questions,
            base_model_params={
                "hash_dims": cfg.encoder.hash_dims,
                "ngram_range": (cfg.encoder.ngram_min, cfg.encoder.ngram_max),
                "embed_dim": cfg.encoder.embed_dim,
                "temperature": cfg.encoder.temperature,
            },
            train_config=TrainConfig(
                epochs=cfg.training.epochs,
                lr=cfg.training.lr,
                batch_size=cfg.training.batch_size,
                hard_neg_k=cfg.training.hard_neg_k,
                hard_neg_m=cfg.training.hard_neg_m,
            ),
            configs=DEFAULT_ABLATION_GRID,
            ks=ks,
            seeds=cfg.eval.ablation_seeds,
        )
        out = cfg.workdir / "ablation_report.json"
        out.write_text(report.to_json() + "\n", encoding="utf-8")
        click.echo(report.to_text())
        click.echo(f"report -> {out}")
        return

    model = load_model(cfg.model_path)
    idx = vindex.load_index(cfg.index_path)

    if metric == "acc":
        rows = {}
        for task in tasks:
            subset = [q for q in questions if q.task == task]
            if subset:
                rows[task] = {k: acc_at_k(subset, model, idx, k) for k in ks}
        out = cfg.workdir / "acc_report.json"
        out.write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        for task, cells in rows.items():
            cells_text = "  ".join(f"acc@{k}={v:.3f}" for k, v in cells.items())
            click.echo(f"{task}: {cells_text}")
        click.echo(f"report -> {out}")
    elif metric == "latency":
        stats = measure_latency(
            idx, model, [q.question for q in questions], max(ks), cfg.eval.latency_repetitions
        )
        out = cfg.workdir / "latency_report.json"
        out.write_text(json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        click.echo(
            f"k={max(ks)}: mean={stats['mean_ms']:.2f}ms p50={stats['p50_ms']:.2f}ms p95={stats['p95_ms']:.2f}ms"
        )
        click.echo(f"report -> {out}")
    else:  # judge
        judge = make_backend(cfg.judge_backend)
        backend = make_backend(cfg.backend)
        lookup = {c.id: c for c in chunks}
        from .runtime import answer as answer_fn

        results = []
        for q in questions:
            record = answer_fn(q.question, q.task, cfg.serve.default_k, model, idx, backend, lookup)
            score = judge_single(q.question, q.reference_answer, record.answer, judge, task=q.task)
            results.append({"question": q.question, "task": q.task, **score})
        out = cfg.workdir / "judge_report.json"
        out.write_text(json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        mean = sum(r["mean"] for r in results) / len(results)
        click.echo(f"judged {len(results)} answers; overall mean rating {mean:.2f}")
        click.echo(f"report -> {out}")


@main.command()
@click.option("--docs", default=200, show_default=True)
@click.option("--topics", default=20, show_default=True)
@click.pass_context
@stage
def synth(ctx, docs, topics):
    """Generate the seeded synthetic corpus into the corpus directory."""
    cfg = _load(ctx)
    from .synthetic import make_synthetic_corpus

    corpus = make_synthetic_corpus(n_docs=docs, n_topics=topics, seed=cfg.seed)
    cfg.corpus_dir.mkdir(parents=True, exist_ok=True)
    for doc_id, markup in corpus.markups:
        (cfg.corpus_dir / f"{doc_id}.md").write_text(markup, encoding="utf-8")
    by_task = {TASK_QAK_LOG: [], TASK_QAT_LOG: []}
    for p in corpus.train_pairs:
        if p.task in by_task:
            by_task[p.task].append(p)
    write_qa_pairs(by_task[TASK_QAK_LOG], cfg.corpus_dir / "qak_log.jsonl")
    write_qa_pairs(by_task[TASK_QAT_LOG], cfg.corpus_dir / "qat_log.jsonl")
    write_eval_set(corpus.eval_questions, cfg.eval_set_path)
    click.echo(
        f"synthetic corpus: {len(corpus.markups)} docs, "
        f"{len(corpus.train_pairs)} raw pairs, {len(corpus.eval_questions)} eval questions -> {cfg.corpus_dir}"
    )


if __name__ == "__main__":
    main()
