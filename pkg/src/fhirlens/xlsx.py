"""Minimal OOXML workbook writer plus an RFC-4180 CSV serializer.

One worksheet per non-empty resource kind plus a transform-report sheet.
Strings are written as inline strings; ids and dates stay text cells so
spreadsheet apps cannot coerce them. The ZIP container is written stored
(no compression) by default for deterministic bytes.
"""

from __future__ import annotations

import csv
import io
import re
import zipfile
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import _kernels as kernels
from .errors import SheetNameCollision
from .model import DOCUMENT_REFERENCE, ENCOUNTER, OBSERVATION, PATIENT, ValueKind
from .normalize import TABLE_COLUMNS, Dataset, cell_text


@dataclass(frozen=True)
class Cell:
    kind: str  # "n" number | "s" text | "e" empty
    text: str = ""

    @staticmethod
    def number(text: str) -> "Cell":
        return Cell("n", text)

    @staticmethod
    def of_text(text: str) -> "Cell":
        return Cell("s", text)

    @staticmethod
    def empty() -> "Cell":
        return Cell("e")


@dataclass(frozen=True)
class Sheet:
    name: str
    header: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]


@dataclass(frozen=True)
class WorkbookModel:
    sheets: tuple[Sheet, ...]


_BAD_SHEET_CHARS = re.compile(r"[\[\]:*?/\\]")


def sanitize_sheet_name(name: str) -> str:
    return _BAD_SHEET_CHARS.sub("_", name)[:31] or "Sheet"


def _text_cell(value) -> Cell:
    text = cell_text(value)
    return Cell.of_text(text) if text else Cell.empty()


def _observation_value_cell(row) -> Cell:
    if row.value is None:
        return Cell.empty()
    if row.value.kind is ValueKind.QUANTITY:
        return Cell.number(row.value.quantity.value_text)
    text = row.value.render()
    return Cell.of_text(text) if text else Cell.empty()


def build_workbook(dataset: Dataset) -> WorkbookModel:
    """One sheet per non-empty kind, then the transform report sheet."""
    sheets: list[Sheet] = []

    def add(kind, sheet_name: str, to_cells) -> None:
        rows = dataset.table(kind)
        if not rows:
            return
        sheets.append(
            Sheet(
                name=sheet_name,
                header=TABLE_COLUMNS[kind.name],
                rows=tuple(tuple(to_cells(r)) for r in rows),
            )
        )

    add(PATIENT, "Patient", lambda r: [
        _text_cell(r.resource_id),
        _text_cell(r.name),
        _text_cell(r.gender),
        _text_cell(r.birth_date),
        _text_cell(r.identifier_summary),
        _text_cell(r.given_full),
    ])
    add(OBSERVATION, "Observation", lambda r: [
        _text_cell(r.resource_id),
        _text_cell(r.subject_ref),
        _text_cell(r.status),
        _text_cell(r.code_system),
        _text_cell(r.code),
        _text_cell(r.display),
        _text_cell(r.effective),
        _observation_value_cell(r),
        _text_cell(r.unit),
        Cell.number(str(r.component_index)),
        _text_cell(r.component_code),
    ])
    add(ENCOUNTER, "Encounter", lambda r: [
        _text_cell(r.resource_id),
        _text_cell(r.status),
        _text_cell(r.class_display),
        _text_cell(r.type_display),
        _text_cell(r.period_start),
        _text_cell(r.period_end),
        _text_cell(r.subject_ref),
    ])
    add(DOCUMENT_REFERENCE, "Documents", lambda r: [
        _text_cell(r.resource_id),
        _text_cell(r.doc_type),
        _text_cell(r.status_combined),
        _text_cell(r.date),
        _text_cell(r.author_ref),
        Cell.of_text("true" if r.content_excluded else "false"),
    ])

    report_rows = []
    for kind, stats in dataset.report.per_kind.items():
        failures = "; ".join(
            f"{f.resource_index}: {f.category.value}" for f in stats.failures
        )
        report_rows.append(
            (
                Cell.of_text(kind.name),
                Cell.number(str(stats.attempted)),
                Cell.number(str(stats.succeeded)),
                Cell.number(repr(dataset.report.success_rate(kind))),
                Cell.of_text(failures) if failures else Cell.empty(),
            )
        )
    sheets.append(
        Sheet(
            name="TransformReport",
            header=("kind", "attempted", "succeeded", "success_rate", "failures"),
            rows=tuple(report_rows),
        )
    )
    return WorkbookModel(sheets=tuple(sheets))


def column_ref(index: int) -> str:
    """0-based column index to A1 letters."""
    letters = ""
    index += 1
    while index:
        index, rem = divmod(index - 1, 26)
        letters = chr(ord("A") + rem) + letters
    return letters


_XML_HEADER = '<?xml version="1.0" encoding="UTF-8" standalone="yes"?>\n'


def _sheet_xml(sheet: Sheet) -> str:
    out = [
        _XML_HEADER,
        '<worksheet xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main">',
        "<sheetData>",
    ]
    header_cells = tuple(Cell.of_text(h) for h in sheet.header)
    for r, cells in enumerate([header_cells, *sheet.rows], start=1):
        out.append(f'<row r="{r}">')
        for c, cell in enumerate(cells):
            if cell.kind == "e":
                continue
            ref = f"{column_ref(c)}{r}"
            if cell.kind == "n":
                out.append(f'<c r="{ref}"><v>{kernels.xml_escape(cell.text)}</v></c>')
            else:
                text = kernels.xml_escape(cell.text)
                space = ' xml:space="preserve"' if cell.text != cell.text.strip() else ""
                out.append(f'<c r="{ref}" t="inlineStr"><is><t{space}>{text}</t></is></c>')
        out.append("</row>")
    out.append("</sheetData></worksheet>")
    return "".join(out)


def _workbook_xml(names: Sequence[str]) -> str:
    sheets = "".join(
        f'<sheet name="{kernels.xml_escape(name)}" sheetId="{i}" r:id="rId{i}"/>'
        for i, name in enumerate(names, start=1)
    )
    return (
        _XML_HEADER
        + '<workbook xmlns="http://schemas.openxmlformats.org/spreadsheetml/2006/main" '
        + 'xmlns:r="http://schemas.openxmlformats.org/officeDocument/2006/relationships">'
        + f"<sheets>{sheets}</sheets></workbook>"
    )


def _workbook_rels(count: int) -> str:
    rels = "".join(
        f'<Relationship Id="rId{i}" '
        'Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/worksheet" '
        f'Target="worksheets/sheet{i}.xml"/>'
        for i in range(1, count + 1)
    )
    return (
        _XML_HEADER
        + '<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">'
        + rels
        + "</Relationships>"
    )


_ROOT_RELS = (
    _XML_HEADER
    + '<Relationships xmlns="http://schemas.openxmlformats.org/package/2006/relationships">'
    '<Relationship Id="rId1" '
    'Type="http://schemas.openxmlformats.org/officeDocument/2006/relationships/officeDocument" '
    'Target="xl/workbook.xml"/></Relationships>'
)


def _content_types(count: int) -> str:
    overrides = "".join(
        f'<Override PartName="/xl/worksheets/sheet{i}.xml" '
        'ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.worksheet+xml"/>'
        for i in range(1, count + 1)
    )
    return (
        _XML_HEADER
        + '<Types xmlns="http://schemas.openxmlformats.org/package/2006/content-types">'
        '<Default Extension="rels" '
        'ContentType="application/vnd.openxmlformats-package.relationships+xml"/>'
        '<Default Extension="xml" ContentType="application/xml"/>'
        '<Override PartName="/xl/workbook.xml" '
        'ContentType="application/vnd.openxmlformats-officedocument.spreadsheetml.sheet.main+xml"/>'
        + overrides
        + "</Types>"
    )


def render_xlsx(model: WorkbookModel, deflate: bool = False) -> bytes:
    """Write the workbook as a ZIP container with a fixed entry timestamp."""
    names = []
    for sheet in model.sheets:
        name = sanitize_sheet_name(sheet.name)
        if name in names:
            raise SheetNameCollision(f"sheet name {name!r} appears more than once")
        names.append(name)

    compression = zipfile.ZIP_DEFLATED if deflate else zipfile.ZIP_STORED
    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, "w", compression=compression) as archive:

        def entry(path: str, text: str) -> None:
            info = zipfile.ZipInfo(path, date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = compression
            info.external_attr = 0o600 << 16
            archive.writestr(info, text.encode("utf-8"))

        entry("[Content_Types].xml", _content_types(len(model.sheets)))
        entry("_rels/.rels", _ROOT_RELS)
        entry("xl/workbook.xml", _workbook_xml(names))
        entry("xl/_rels/workbook.xml.rels", _workbook_rels(len(model.sheets)))
        for i, sheet in enumerate(model.sheets, start=1):
            entry(f"xl/worksheets/sheet{i}.xml", _sheet_xml(sheet))
    return buffer.getvalue()


def render_csv(columns: Sequence[str], rows: Iterable[Sequence[str]]) -> bytes:
    """RFC-4180 CSV: CRLF line endings, minimal quoting, header row first."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row)
    return out.getvalue().encode("utf-8")
