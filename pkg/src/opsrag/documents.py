"""Structured-document model and the portable markup parser.

Source documents arrive as a markdown-like markup: ATX headings (``#`` to
``######``), blank-line separated paragraphs, and pipe tables. Parsing turns
them into a flat, ordered block list; heading levels encode the tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import MalformedMarkup


class BlockKind(str, Enum):
    HEADING = "heading"
    PARAGRAPH = "paragraph"
    TABLE = "table"


@dataclass(frozen=True)
class Block:
    """One source block. ``level`` is set for headings, ``rows`` for tables.

    ``text`` is the heading title, the paragraph body, or the flattened
    table (rows joined by line breaks, cells by vertical lines).
    """

    kind: BlockKind
    text: str
    level: int = 0
    rows: tuple[tuple[str, ...], ...] = field(default=())

    def __post_init__(self):
        if self.kind is BlockKind.HEADING and not 1 <= self.level <= 6:
            raise MalformedMarkup(f"heading level {self.level} outside 1..6")
        if self.kind is BlockKind.TABLE and not self.rows:
            raise MalformedMarkup("table block with no rows")


@dataclass(frozen=True)
class Document:
    id: str
    blocks: tuple[Block, ...]


def table_to_text(rows) -> str:
    """Flatten table rows: cells joined by ``|``, rows by line breaks."""
    return "\n".join("|".join(str(c) for c in row) for row in rows)


_HEADING_RE = re.compile(r"^(#{1,7})\s*(.*)$")
_SEPARATOR_CELL_RE = re.compile(r"^:?-+:?$")


def _parse_table(lines: list[str], lineno: int) -> Block:
    rows: list[tuple[str, ...]] = []
    for offset, line in enumerate(lines):
        body = line.strip()
        if not (body.startswith("|") and body.endswith("|") and len(body) >= 2):
            raise MalformedMarkup(f"line {lineno + offset}: unparseable table row {line!r}")
        cells = tuple(c.strip() for c in body[1:-1].split("|"))
        if not any(cells):
            raise MalformedMarkup(f"line {lineno + offset}: empty table row {line!r}")
        if all(_SEPARATOR_CELL_RE.match(c) for c in cells):
            continue  # header separator row carries no data
        rows.append(cells)
    if not rows:
        raise MalformedMarkup(f"line {lineno}: table has no data rows")
    return Block(kind=BlockKind.TABLE, text=table_to_text(rows), rows=tuple(rows))


def parse_document(source: str, doc_id: str = "doc") -> Document:
    """Parse markup into a Document, preserving source order.

    Raises MalformedMarkup for heading levels beyond 6 or table rows that
    cannot be split into cells.
    """
    blocks: list[Block] = []
    lines = source.split("\n")
    i = 0
    n = len(lines)
    while i < n:
        line = lines[i]
        stripped = line.strip()
        if not stripped:
            i += 1
            continue

        m = _HEADING_RE.match(stripped)
        if m:
            level = len(m.group(1))
            if level > 6:
                raise MalformedMarkup(f"line {i}: heading level {level} > 6")
            blocks.append(Block(kind=BlockKind.HEADING, text=m.group(2).strip(), level=level))
            i += 1
            continue

        if stripped.startswith("|"):
            start = i
            while i < n and lines[i].strip().startswith("|"):
                i += 1
            blocks.append(_parse_table(lines[start:i], start))
            continue

        # paragraph: run of non-blank, non-heading, non-table lines
        start = i
        para: list[str] = []
        while i < n:
            cur = lines[i].strip()
            if not cur or cur.startswith("|") or _HEADING_RE.match(cur):
                break
            para.append(cur)
            i += 1
        blocks.append(Block(kind=BlockKind.PARAGRAPH, text="\n".join(para)))

    return Document(id=doc_id, blocks=tuple(blocks))


def document_to_record(doc: Document) -> dict:
    blocks = []
    for b in doc.blocks:
        rec = {"kind": b.kind.value, "text": b.text}
        if b.kind is BlockKind.HEADING:
            rec["level"] = b.level
        if b.kind is BlockKind.TABLE:
            rec["rows"] = [list(r) for r in b.rows]
        blocks.append(rec)
    return {"id": doc.id, "blocks": blocks}


def document_from_record(rec: dict) -> Document:
    blocks = []
    for b in rec["blocks"]:
        kind = BlockKind(b["kind"])
        blocks.append(
            Block(
                kind=kind,
                text=b["text"],
                level=b.get("level", 0),
                rows=tuple(tuple(r) for r in b.get("rows", ())),
            )
        )
    return Document(id=rec["id"], blocks=tuple(blocks))


def heading_forest_valid(doc: Document) -> bool:
    """True when heading levels nest properly (children strictly deeper).

    Any level sequence is technically representable in a flat list; the check
    rejects only levels outside 1..6, which the Block constructor already
    enforces. Kept as an explicit validator for property tests.
    """
    return all(
        1 <= b.level <= 6 for b in doc.blocks if b.kind is BlockKind.HEADING
    )
