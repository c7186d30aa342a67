"""Shared verification helpers for the writer-vs-reader checks."""

from __future__ import annotations

import re

from fhirlens.model import DOCUMENT_REFERENCE, ENCOUNTER, OBSERVATION, PATIENT
from fhirlens.normalize import TABLE_COLUMNS, Dataset, row_cells

import pdfread
import xlsxread

_FOOTER_PAGE = re.compile(r"^Page \d+ of \d+$")

TABLE_HEADINGS = {
    "Patients": PATIENT,
    "Observations": OBSERVATION,
    "Encounters": ENCOUNTER,
    "Documents": DOCUMENT_REFERENCE,
}
_ALL_HEADINGS = (
    "Patient Demographics",
    *TABLE_HEADINGS.keys(),
    "Series Summaries",
    "Transform Report",
    "Failure Categories",
    "Summary",
)

_DEMO_LABELS = (
    "Resource Type",
    "Patient ID",
    "Name",
    "Gender",
    "Date of Birth",
    "Identifiers",
    "Given Names",
)


def _squash(text: str) -> str:
    return text.replace(" ", "")


def pdf_sections(pdf: bytes) -> dict[str, list[str]]:
    """Text lines grouped by report section heading, footers removed."""
    lines = [
        line
        for line in pdfread.extract_text_lines(pdf)
        if not line.startswith("Generated ") and not _FOOTER_PAGE.match(line)
    ]
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in lines:
        if line in _ALL_HEADINGS:
            current = sections.setdefault(line, [])
        elif current is not None:
            current.append(line)
    return sections


def verify_pdf_against_dataset(pdf: bytes, dataset: Dataset) -> None:
    """Structure check plus exact content equality per table region.

    Region equality (after whitespace squashing, which erases wrap points) is
    stronger than counting: every cell appears exactly once within its
    section, in row order, with nothing extra interleaved.
    """
    pdfread.parse_pdf(pdf)  # xref offsets, document graph, stream lengths
    sections = pdf_sections(pdf)

    patients = dataset.table(PATIENT)
    if len(patients) == 1:
        row = patients[0]
        values = (
            "Patient",
            row.resource_id,
            row.name,
            row.gender,
            row.birth_date,
            row.identifier_summary,
            row.given_full,
        )
        expected = _squash(
            "".join(label + value for label, value in zip(_DEMO_LABELS, values))
        )
        actual = _squash("".join(sections["Patient Demographics"]))
        assert actual == expected, "demographics section does not match patient row"

    for heading, kind in TABLE_HEADINGS.items():
        rows = dataset.table(kind)
        if kind == PATIENT and len(rows) == 1:
            assert heading not in sections
            continue
        if not rows:
            assert heading not in sections
            continue
        expected = _squash("".join(TABLE_COLUMNS[kind.name]))
        for row in rows:
            expected += _squash("".join(row_cells(row)))
        actual = _squash("".join(sections[heading]))
        assert actual == expected, f"{heading} section does not reproduce its table"


def verify_xlsx_against_model(xlsx: bytes, model) -> None:
    """Every sheet, header, and cell must round-trip through the reader."""
    sheets = xlsxread.read_workbook(xlsx)
    assert list(sheets.keys()) == [s.name for s in model.sheets]
    for sheet in model.sheets:
        grid = sheets[sheet.name]
        expected_rows = [tuple(("s", h) for h in sheet.header)]
        for row in sheet.rows:
            expected_rows.append(
                tuple(None if c.kind == "e" else (c.kind, c.text) for c in row)
            )
        assert len(grid) == len(expected_rows), f"{sheet.name}: row count mismatch"
        for r, expected in enumerate(expected_rows):
            got = tuple(grid[r]) + (None,) * (len(expected) - len(grid[r]))
            assert got == expected, f"{sheet.name} row {r + 1}: {got} != {expected}"
