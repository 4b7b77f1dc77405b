"""Heading-aware and sliding-window chunkers.

The targeted chunker walks the heading tree: a section whose rendered text
fits the token budget is emitted whole; otherwise it is split at the next
heading level, and a section with no further headings falls through to the
general sliding-window splitter. Sub-minimum pieces are merged into their
neighbors. Chunk bodies carry only non-heading source text; heading context
survives in the title path of the rendered ``Title: ... Content: ...`` form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .documents import Block, BlockKind, Document
from .errors import EmptyDocument
from .tokenization import DEFAULT_TOKENIZER, Tokenizer, count_tokens

DEFAULT_MAX_TOKENS = 800
DEFAULT_MIN_TOKENS = 20
DEFAULT_OVERLAP_TOKENS = 100

# Sentence-final characters a general-chunk boundary may snap to. Line breaks
# are detected from the inter-token gap instead.
STOP_TOKENS = frozenset({".", ",", "。", "，"})

TITLE_SEPARATOR = " - "

METHOD_TARGETED = "targeted"
METHOD_GENERAL = "general"


@dataclass(frozen=True)
class Chunk:
    id: str
    doc_id: str
    title_path: tuple[str, ...]
    body: str
    token_count: int
    method: str

    def rendered(self) -> str:
        return render_chunk_text(self.title_path, self.body)


def render_chunk_text(title_path: Iterable[str], body: str) -> str:
    """Apply the title/content template; bare body when no heading path."""
    titles = list(title_path)
    if titles:
        return f"Title: {TITLE_SEPARATOR.join(titles)} Content: {body}"
    return body


def _template_overhead(title_path: tuple[str, ...], tok: Tokenizer) -> int:
    if not title_path:
        return 0
    return count_tokens(render_chunk_text(title_path, ""), tok)


@dataclass
class _Piece:
    """Chunk under construction, before ids and final counts are assigned."""

    title_path: tuple[str, ...]
    body: str
    method: str


def _body_of(blocks: Iterable[Block]) -> str:
    parts = [b.text for b in blocks if b.kind is not BlockKind.HEADING and b.text]
    return "\n\n".join(parts)


def _split_at_level(blocks: list[Block]) -> tuple[list[Block], list[tuple[Block, list[Block]]]]:
    """Split ``blocks`` at their shallowest heading level.

    Returns (intro blocks before the first such heading,
    [(heading, section blocks), ...]).
    """
    split_level = min(b.level for b in blocks if b.kind is BlockKind.HEADING)
    intro: list[Block] = []
    sections: list[tuple[Block, list[Block]]] = []
    current: list[Block] | None = None
    for b in blocks:
        if b.kind is BlockKind.HEADING and b.level == split_level:
            current = []
            sections.append((b, current))
            continue
        if current is None:
            intro.append(b)
        else:
            current.append(b)
    return intro, sections


def _chunk_section(
    title_path: tuple[str, ...],
    blocks: list[Block],
    max_tokens: int,
    overlap_tokens: int,
    tok: Tokenizer,
    out: list[_Piece],
) -> None:
    body = _body_of(blocks)
    if not body and not any(b.kind is BlockKind.HEADING for b in blocks):
        return
    if body and count_tokens(render_chunk_text(title_path, body), tok) <= max_tokens:
        out.append(_Piece(title_path, body, METHOD_TARGETED))
        return
    if any(b.kind is BlockKind.HEADING for b in blocks):
        intro, sections = _split_at_level(blocks)
        if intro:
            _chunk_section(title_path, intro, max_tokens, overlap_tokens, tok, out)
        for heading, section in sections:
            _chunk_section(
                title_path + (heading.text,), section, max_tokens, overlap_tokens, tok, out
            )
        return
    # No headings left to split at: oversize atomic content, general fallback.
    for piece_body in _general_pieces(body, max_tokens, overlap_tokens, tok, title_path):
        out.append(_Piece(title_path, piece_body, METHOD_GENERAL))


def _merge_small(pieces: list[_Piece], min_tokens: int, tok: Tokenizer) -> list[_Piece]:
    """Fold sub-minimum pieces into the preceding (else following) piece."""

    def tokens(p: _Piece) -> int:
        return count_tokens(render_chunk_text(p.title_path, p.body), tok)

    merged = list(pieces)
    while len(merged) > 1:
        small = next((i for i, p in enumerate(merged) if tokens(p) < min_tokens), None)
        if small is None:
            break
        if small > 0:
            recv = merged[small - 1]
            recv.body = f"{recv.body}\n\n{merged[small].body}"
            del merged[small]
        else:
            recv = merged[1]
            recv.body = f"{merged[0].body}\n\n{recv.body}"
            del merged[0]
    return merged


def _finalize(pieces: list[_Piece], doc_id: str, tok: Tokenizer) -> list[Chunk]:
    return [
        Chunk(
            id=f"{doc_id}-{i:04d}",
            doc_id=doc_id,
            title_path=p.title_path,
            body=p.body,
            token_count=count_tokens(render_chunk_text(p.title_path, p.body), tok),
            method=p.method,
        )
        for i, p in enumerate(pieces)
    ]


def chunk_targeted(
    doc: Document,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    min_tokens: int = DEFAULT_MIN_TOKENS,
    overlap_tokens: int = DEFAULT_OVERLAP_TOKENS,
    tok: Tokenizer | None = None,
) -> list[Chunk]:
    """Chunk a cleaned document along its heading tree.

    ``overlap_tokens`` only applies to sections that fall through to the
    general splitter. Raises EmptyDocument when the document carries no
    non-heading content.
    """
    if max_tokens <= min_tokens:
        raise ValueError("max_tokens must exceed min_tokens")
    tok = tok or DEFAULT_TOKENIZER
    blocks = list(doc.blocks)
    if not any(b.kind is not BlockKind.HEADING and b.text for b in blocks):
        raise EmptyDocument(f"document {doc.id!r} has no chunkable content")

    pieces: list[_Piece] = []
    if any(b.kind is BlockKind.HEADING for b in blocks):
        # Always split at the shallowest heading level before sizing anything,
        # so sibling sections never collapse into one whole-document chunk.
        intro, sections = _split_at_level(blocks)
        if intro:
            _chunk_section((), intro, max_tokens, overlap_tokens, tok, pieces)
        for heading, section in sections:
            _chunk_section((heading.text,), section, max_tokens, overlap_tokens, tok, pieces)
    else:
        _chunk_section((), blocks, max_tokens, overlap_tokens, tok, pieces)
    pieces = _merge_small(pieces, min_tokens, tok)
    return _finalize(pieces, doc.id, tok)


def _general_pieces(
    text: str,
    max_tokens: int,
    overlap_tokens: int,
    tok: Tokenizer,
    title_path: tuple[str, ...] = (),
) -> list[str]:
    if overlap_tokens >= max_tokens:
        raise ValueError("overlap_tokens must be smaller than max_tokens")
    spans = list(tok.spans(text))
    if not spans:
        return []
    budget = max(1, max_tokens - _template_overhead(title_path, tok))

    bodies: list[str] = []
    start = 0
    n = len(spans)
    while start < n:
        window_end = min(start + budget, n)
        cut = window_end
        if window_end < n:
            snapped = _snap_to_stop(text, spans, start, window_end)
            if snapped is not None:
                cut = snapped
        bodies.append(text[spans[start][0] : spans[cut - 1][1]])
        if cut >= n:
            break
        start = max(start + 1, cut - overlap_tokens)
    return bodies


def _snap_to_stop(
    text: str, spans: list[tuple[int, int]], start: int, window_end: int
) -> int | None:
    """Largest cut in (start, window_end] whose last token ends a sentence."""
    for j in range(window_end, start, -1):
        tok_text = text[spans[j - 1][0] : spans[j - 1][1]]
        if tok_text in STOP_TOKENS:
            return j
        gap_end = spans[j][0] if j < len(spans) else len(text)
        if "\n" in text[spans[j - 1][1] : gap_end]:
            return j
    return None


def chunk_general(
    text: str,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    overlap_tokens: int = DEFAULT_OVERLAP_TOKENS,
    tok: Tokenizer | None = None,
    doc_id: str = "doc",
    title_path: tuple[str, ...] = (),
) -> list[Chunk]:
    """Fixed-budget sliding-window chunking with stop-character snapping.

    Consecutive chunks share at least ``overlap_tokens`` tokens when the text
    allows it; every boundary prefers to land just after a line break, period,
    or comma found inside the window.
    """
    tok = tok or DEFAULT_TOKENIZER
    pieces = [
        _Piece(title_path, body, METHOD_GENERAL)
        for body in _general_pieces(text, max_tokens, overlap_tokens, tok, title_path)
    ]
    return _finalize(pieces, doc_id, tok)


# --- chunk store (JSON-lines) -------------------------------------------------

_FIELD_ORDER = ("id", "doc_id", "title_path", "body", "token_count", "method")


def chunk_to_record(chunk: Chunk) -> dict:
    return {
        "id": chunk.id,
        "doc_id": chunk.doc_id,
        "title_path": list(chunk.title_path),
        "body": chunk.body,
        "token_count": chunk.token_count,
        "method": chunk.method,
    }


def write_chunks(chunks: Iterable[Chunk], path: str | Path) -> None:
    """Write one chunk per line with a fixed field order (byte-stable)."""
    with open(path, "w", encoding="utf-8") as f:
        for c in chunks:
            f.write(json.dumps(chunk_to_record(c), ensure_ascii=False))
            f.write("\n")


def read_chunks(path: str | Path) -> list[Chunk]:
    chunks = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            chunks.append(
                Chunk(
                    id=rec["id"],
                    doc_id=rec["doc_id"],
                    title_path=tuple(rec["title_path"]),
                    body=rec["body"],
                    token_count=rec["token_count"],
                    method=rec["method"],
                )
            )
    return chunks
