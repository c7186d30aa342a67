"""Single entry point for rendering a Dataset to PDF/XLSX/CSV bytes.

Both the CLI and the HTTP service call this, which is what makes their
outputs byte-identical in fixed-timestamp mode.
"""

from __future__ import annotations

from datetime import datetime

from .model import DOCUMENT_REFERENCE, ENCOUNTER, OBSERVATION, PATIENT, ResourceKind
from .normalize import TABLE_COLUMNS, Dataset, row_cells
from .pdfwriter import render_pdf
from .report import EPOCH, build_report
from .xlsx import build_workbook, render_csv, render_xlsx

MEDIA_TYPES = {
    "pdf": "application/pdf",
    "xlsx": "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet",
    "csv": "text/csv",
}

KIND_BY_NAME = {
    "Patient": PATIENT,
    "Observation": OBSERVATION,
    "Encounter": ENCOUNTER,
    "DocumentReference": DOCUMENT_REFERENCE,
}


def resolve_kind(name: str) -> ResourceKind:
    try:
        return KIND_BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown resource kind {name!r}") from None


def export_dataset(
    dataset: Dataset,
    fmt: str,
    kind: str | None = None,
    generated_at: datetime | None = None,
    fixed_timestamp: bool = False,
) -> tuple[bytes, str, str]:
    """Render an export; returns (bytes, media type, suggested filename)."""
    if fixed_timestamp:
        generated_at = EPOCH
    if fmt == "pdf":
        doc = build_report(dataset, generated_at=generated_at)
        return render_pdf(doc), MEDIA_TYPES["pdf"], "report.pdf"
    if fmt == "xlsx":
        return render_xlsx(build_workbook(dataset)), MEDIA_TYPES["xlsx"], "report.xlsx"
    if fmt == "csv":
        if not kind:
            raise ValueError("csv export requires a resource kind")
        resolved = resolve_kind(kind)
        columns = TABLE_COLUMNS[resolved.name]
        rows = [row_cells(r) for r in dataset.table(resolved)]
        return render_csv(columns, rows), MEDIA_TYPES["csv"], f"{resolved.name.lower()}.csv"
    raise ValueError(f"unknown export format {fmt!r}")
