"""Noise removal for parsed documents.

Two heuristics ship as defaults: leading menu / table-of-contents spans are
dropped wholesale, and blocks carrying maintenance-only boilerplate (script
maintainer lines, version-number tables) are filtered out. Both are plain
configuration; callers can pass their own pattern set.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Pattern

from .documents import Block, BlockKind, Document

DEFAULT_NOISE_KEYWORDS = (
    r"Script\s+Maintainer",
    r"Version\s+Number",
)

DEFAULT_MENU_TITLES = r"^(contents|table of contents|menu|目录)$"


@dataclass(frozen=True)
class NoiseConfig:
    """Compiled removal rules. ``block_patterns`` match anywhere in a block's
    text (tables match on their flattened form); ``menu_title`` matches the
    full heading title that opens a menu span."""

    block_patterns: tuple[Pattern[str], ...] = field(
        default_factory=lambda: tuple(
            re.compile(p, re.IGNORECASE) for p in DEFAULT_NOISE_KEYWORDS
        )
    )
    menu_title: Pattern[str] = field(
        default_factory=lambda: re.compile(DEFAULT_MENU_TITLES, re.IGNORECASE)
    )


def _menu_span_end(blocks: tuple[Block, ...], start: int) -> int:
    """Index one past the menu span opened by the heading at ``start``.

    The span runs until the next heading at the same or a shallower level;
    for an H1 menu this is exactly "everything until the first real H1".
    """
    menu_level = blocks[start].level
    for j in range(start + 1, len(blocks)):
        b = blocks[j]
        if b.kind is BlockKind.HEADING and b.level <= menu_level:
            return j
    return len(blocks)


def clean_text(doc: Document, noise: NoiseConfig | None = None) -> Document:
    """Return a new Document with noise blocks removed.

    Surviving blocks are the original objects, untouched. An empty result is
    allowed.
    """
    noise = noise or NoiseConfig()
    kept: list[Block] = []
    i = 0
    blocks = doc.blocks
    while i < len(blocks):
        b = blocks[i]
        if b.kind is BlockKind.HEADING and noise.menu_title.match(b.text.strip()):
            i = _menu_span_end(blocks, i)
            continue
        if any(p.search(b.text) for p in noise.block_patterns):
            i += 1
            continue
        kept.append(b)
        i += 1
    return Document(id=doc.id, blocks=tuple(kept))
