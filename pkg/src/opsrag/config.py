"""Pipeline configuration and run manifests.

One YAML file drives every subcommand; CLI flags and environment variables
override individual fields. Each stage writes a manifest of content hashes
(inputs, config, outputs) so reruns can be compared byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError


@dataclass
class ChunkingConfig:
    max_tokens: int = 800
    min_tokens: int = 20
    overlap_tokens: int = 100


@dataclass
class EncoderConfig:
    hash_dims: int = 1 << 18
    ngram_min: int = 3
    ngram_max: int = 5
    embed_dim: int = 256
    temperature: float = 0.05


@dataclass
class TrainingSection:
    epochs: int = 1
    lr: float = 1e-3
    batch_size: int = 16
    hard_neg_k: int = 10
    hard_neg_m: int = 5
    his: bool = True
    ahns: bool = True
    negative_pool: int = 1
    refresh_negatives: bool = False


@dataclass
class IndexConfig:
    mode: str = "exact"
    nlist: int = 16
    nprobe: int = 4


@dataclass
class ServeSection:
    host: str = "127.0.0.1"
    port: int = 8080
    default_k: int = 5
    allow_zero_context: bool = False


@dataclass
class EvalSection:
    k_values: tuple[int, ...] = (1, 5, 20)
    latency_repetitions: int = 3
    ablation_seeds: tuple[int, ...] = (0, 1, 2, 3, 4)


@dataclass
class PipelineConfig:
    workdir: Path
    corpus_dir: Path
    seed: int = 0
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    training: TrainingSection = field(default_factory=TrainingSection)
    index: IndexConfig = field(default_factory=IndexConfig)
    serve: ServeSection = field(default_factory=ServeSection)
    eval: EvalSection = field(default_factory=EvalSection)
    backend: object = "mock"
    escalation_backend: object = "mock"
    judge_backend: object = "mock"
    raft_k: int = 5

    # derived artifact paths
    @property
    def docs_path(self) -> Path:
        return self.workdir / "documents.jsonl"

    @property
    def chunks_path(self) -> Path:
        return self.workdir / "chunks.jsonl"

    @property
    def qak_gpt_path(self) -> Path:
        return self.workdir / "qak_gpt.jsonl"

    @property
    def data_em_path(self) -> Path:
        return self.workdir / "data_em.jsonl"

    @property
    def data_llm_path(self) -> Path:
        return self.workdir / "data_llm.jsonl"

    @property
    def model_path(self) -> Path:
        return self.workdir / "encoder.rgem"

    @property
    def index_path(self) -> Path:
        return self.workdir / "chunks.rgix"

    @property
    def sidecar_path(self) -> Path:
        return self.workdir / "chunks.sidecar.jsonl"

    @property
    def raft_path(self) -> Path:
        return self.workdir / "raft.jsonl"

    @property
    def eval_set_path(self) -> Path:
        return self.corpus_dir / "eval_set.jsonl"


def _apply(section, data: dict, name: str):
    for key, value in data.items():
        if not hasattr(section, key):
            raise ConfigError(f"unknown key {name}.{key}")
        current = getattr(section, key)
        if isinstance(current, tuple):
            value = tuple(value)
        setattr(section, key, value)
    return section


def load_config(path: str | Path, overrides: dict | None = None) -> PipelineConfig:
    """Parse a YAML config file; ``overrides`` wins over file values."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")

    base = path.parent
    try:
        workdir = base / raw.get("workdir", "work")
        corpus_dir = base / raw.get("corpus_dir", "corpus")
        cfg = PipelineConfig(workdir=workdir, corpus_dir=corpus_dir, seed=int(raw.get("seed", 0)))
        for name, section in (
            ("chunking", cfg.chunking),
            ("encoder", cfg.encoder),
            ("training", cfg.training),
            ("index", cfg.index),
            ("serve", cfg.serve),
            ("eval", cfg.eval),
        ):
            if name in raw:
                _apply(section, raw[name] or {}, name)
        cfg.backend = raw.get("backend", "mock")
        cfg.escalation_backend = raw.get("escalation_backend", "mock")
        cfg.judge_backend = raw.get("judge_backend", "mock")
        cfg.raft_k = int(raw.get("raft_k", 5))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "seed":
            cfg.seed = int(value)
        elif key == "backend":
            cfg.backend = value
        else:
            raise ConfigError(f"unknown override {key!r}")
    return cfg


def config_digest(cfg: PipelineConfig) -> str:
    """Stable hash over the semantic config content (paths excluded)."""

    def encode(obj):
        if hasattr(obj, "__dataclass_fields__"):
            return {k: encode(getattr(obj, k)) for k in obj.__dataclass_fields__}
        if isinstance(obj, (tuple, list)):
            return [encode(x) for x in obj]
        if isinstance(obj, Path):
            return obj.name
        return obj

    payload = json.dumps(encode(cfg), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# --- run manifests -----------------------------------------------------------------


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(
    cfg: PipelineConfig,
    stage: str,
    inputs: dict[str, Path],
    outputs: dict[str, Path],
) -> Path:
    """Record {stage, config hash, input hashes, output hashes} as JSON.

    Content hashes only — no timestamps — so identical reruns produce
    identical manifests.
    """
    manifest = {
        "stage": stage,
        "config_hash": config_digest(cfg),
        "inputs": {name: file_digest(p) for name, p in sorted(inputs.items())},
        "outputs": {name: file_digest(p) for name, p in sorted(outputs.items())},
    }
    out = cfg.workdir / f"{stage}.manifest.json"
    out.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out
