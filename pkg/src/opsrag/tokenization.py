"""Deterministic tokenizers used for chunk sizing.

Token counts gate every chunking decision, so the default tokenizer is a
plain regex split (word runs and individual punctuation marks) that behaves
identically on every platform. Model-specific tokenizers can be plugged in
through the same interface when counts need to match a deployed model.
"""

from __future__ import annotations

import re
from typing import Callable, Iterator, Protocol


class Tokenizer(Protocol):
    """Anything that deterministically maps text to a token sequence."""

    def tokenize(self, text: str) -> list[str]: ...

    def spans(self, text: str) -> Iterator[tuple[int, int]]:
        """Yield (start, end) character offsets, one per token."""
        ...


class RegexWordTokenizer:
    """Splits on word-character runs; punctuation marks are single tokens.

    Whitespace never produces a token, which keeps counts stable under
    re-wrapping and lets chunk bodies be sliced as raw substrings.
    """

    _pattern = re.compile(r"\w+|[^\w\s]", re.UNICODE)

    def tokenize(self, text: str) -> list[str]:
        return self._pattern.findall(text)

    def spans(self, text: str) -> Iterator[tuple[int, int]]:
        for m in self._pattern.finditer(text):
            yield m.span()


class CallableTokenizer:
    """Adapter for external tokenizers exposed as a plain callable.

    The callable must be deterministic. Span information is unavailable, so
    general chunking falls back to the regex tokenizer for boundary snapping.
    """

    def __init__(self, fn: Callable[[str], list[str]]):
        self._fn = fn

    def tokenize(self, text: str) -> list[str]:
        return self._fn(text)

    def spans(self, text: str) -> Iterator[tuple[int, int]]:
        raise NotImplementedError("external tokenizers do not expose spans")


DEFAULT_TOKENIZER = RegexWordTokenizer()


def count_tokens(text: str, tok: Tokenizer | None = None) -> int:
    """Number of tokens in ``text`` under ``tok`` (default: regex words)."""
    tok = tok or DEFAULT_TOKENIZER
    return len(tok.tokenize(text))
