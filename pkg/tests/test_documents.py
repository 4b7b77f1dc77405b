import pytest

from opsrag.documents import (
    Block,
    BlockKind,
    Document,
    document_from_record,
    document_to_record,
    heading_forest_valid,
    parse_document,
    table_to_text,
)
from opsrag.errors import MalformedMarkup


def kinds(doc: Document) -> list[str]:
    return [b.kind.value for b in doc.blocks]


class TestParseDocument:
    def test_heading_then_paragraph(self):
        doc = parse_document("# A\ntext")
        assert kinds(doc) == ["heading", "paragraph"]
        assert doc.blocks[0].level == 1
        assert doc.blocks[0].text == "A"
        assert doc.blocks[1].text == "text"

    def test_two_sections_in_source_order(self):
        src = "# One\n\npara1\n\n## Sub1\n\n# Two\n\npara2\n\n## Sub2"
        doc = parse_document(src)
        assert kinds(doc) == ["heading", "paragraph", "heading"] * 2
        assert [b.text for b in doc.blocks if b.kind is BlockKind.HEADING] == [
            "One",
            "Sub1",
            "Two",
            "Sub2",
        ]

    def test_two_by_two_table(self):
        doc = parse_document("| a | b |\n|---|---|\n| c | d |")
        assert kinds(doc) == ["table"]
        assert doc.blocks[0].rows == (("a", "b"), ("c", "d"))

    def test_table_text_is_flattened_form(self):
        doc = parse_document("| a | b |\n| c | d |")
        assert doc.blocks[0].text == "a|b\nc|d"

    def test_heading_level_seven_rejected(self):
        with pytest.raises(MalformedMarkup):
            parse_document("####### too deep")

    def test_unparseable_table_row_rejected(self):
        with pytest.raises(MalformedMarkup):
            parse_document("| a | b |\n|\n| c | d |")

    def test_separator_only_table_rejected(self):
        with pytest.raises(MalformedMarkup):
            parse_document("|---|---|")

    def test_multiline_paragraph_joined(self):
        doc = parse_document("first line\nsecond line\n\nother")
        assert kinds(doc) == ["paragraph", "paragraph"]
        assert doc.blocks[0].text == "first line\nsecond line"

    def test_every_block_appears_once(self):
        src = "# H\n\np1\n\n| x |\n\np2"
        doc = parse_document(src)
        assert kinds(doc) == ["heading", "paragraph", "table", "paragraph"]

    def test_heading_forest_valid_for_parsed_docs(self):
        src = "# a\n## b\n### c\n## d\n# e"
        assert heading_forest_valid(parse_document(src))


class TestTableToText:
    def test_rows_and_cells_joined(self):
        assert table_to_text([["a", "b"], ["c", "d"]]) == "a|b\nc|d"

    def test_single_cell(self):
        assert table_to_text([["x"]]) == "x"

    def test_empty_table(self):
        assert table_to_text([]) == ""


class TestBlockInvariants:
    def test_heading_level_bounds(self):
        with pytest.raises(MalformedMarkup):
            Block(kind=BlockKind.HEADING, text="x", level=0)
        with pytest.raises(MalformedMarkup):
            Block(kind=BlockKind.HEADING, text="x", level=7)

    def test_table_rows_non_empty(self):
        with pytest.raises(MalformedMarkup):
            Block(kind=BlockKind.TABLE, text="", rows=())


def test_document_record_round_trip():
    src = "# H\n\npara\n\n| a | b |\n| c | d |\n\n## Sub\n\nmore"
    doc = parse_document(src, doc_id="rt")
    assert document_from_record(document_to_record(doc)) == doc
