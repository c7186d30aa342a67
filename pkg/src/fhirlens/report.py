"""Layout-independent report model built from a Dataset.

The document is a flat list of sections (key-value list, table, or
paragraph); the PDF writer decides pagination and geometry. Section order is
fixed: demographics, one table per resource kind, series summaries, then the
transform accounting.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Union

from .model import DOCUMENT_REFERENCE, ENCOUNTER, OBSERVATION, PATIENT, decimal_text
from .normalize import TABLE_COLUMNS, Dataset, row_cells
from .series import extract_series, summarize

EPOCH = datetime.fromtimestamp(0, tz=timezone.utc)


@dataclass(frozen=True)
class TableBody:
    columns: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class KeyValueBody:
    pairs: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class ParagraphBody:
    text: str


Body = Union[TableBody, KeyValueBody, ParagraphBody]


@dataclass(frozen=True)
class Section:
    heading: str
    body: Body


@dataclass(frozen=True)
class ReportDocument:
    title: str
    sections: tuple[Section, ...]
    generated_at: datetime
    source_label: str

    @property
    def footer_timestamp(self) -> str:
        return self.generated_at.strftime("%Y-%m-%dT%H:%M:%SZ")


_DEMOGRAPHIC_LABELS = (
    ("Resource Type", None),
    ("Patient ID", "resource_id"),
    ("Name", "name"),
    ("Gender", "gender"),
    ("Date of Birth", "birth_date"),
    ("Identifiers", "identifier_summary"),
    ("Given Names", "given_full"),
)

_TABLE_SECTIONS = (
    (PATIENT, "Patients"),
    (OBSERVATION, "Observations"),
    (ENCOUNTER, "Encounters"),
    (DOCUMENT_REFERENCE, "Documents"),
)


def build_report(dataset: Dataset, generated_at: datetime | None = None) -> ReportDocument:
    """Assemble the fixed report layout for one dataset.

    A single patient renders as a demographics key-value list instead of a
    one-row table, matching the clinical summary style; with several patients
    the tabular form carries them all. Empty kinds are skipped.
    """
    sections: list[Section] = []

    patients = dataset.table(PATIENT)
    demographics_only = len(patients) == 1
    if demographics_only:
        row = patients[0]
        pairs = tuple(
            (label, "Patient" if attr is None else getattr(row, attr))
            for label, attr in _DEMOGRAPHIC_LABELS
        )
        sections.append(Section("Patient Demographics", KeyValueBody(pairs)))

    for kind, heading in _TABLE_SECTIONS:
        if kind == PATIENT and demographics_only:
            continue
        rows = dataset.table(kind)
        if not rows:
            continue
        body = TableBody(
            columns=TABLE_COLUMNS[kind.name],
            rows=tuple(tuple(row_cells(r)) for r in rows),
        )
        sections.append(Section(heading, body))

    series_set = extract_series(dataset)
    summaries = summarize(series_set)
    if summaries:
        rows = []
        for key in sorted(summaries, key=lambda k: k.sort_key()):
            s = summaries[key]
            rows.append(
                (
                    series_set.label(key),
                    key.code,
                    series_set.units.get(key, ""),
                    str(s.count),
                    decimal_text(s.min),
                    decimal_text(s.max),
                    s.mean_text,
                    s.first_t.iso_text,
                    s.last_t.iso_text,
                )
            )
        sections.append(
            Section(
                "Series Summaries",
                TableBody(
                    columns=("series", "code", "unit", "count", "min", "max", "mean", "first", "last"),
                    rows=tuple(rows),
                ),
            )
        )

    report_rows = []
    category_counts: dict[str, int] = {}
    for kind, stats in dataset.report.per_kind.items():
        rate = dataset.report.success_rate(kind)
        report_rows.append(
            (kind.name, str(stats.attempted), str(stats.succeeded), f"{rate:.2%}")
        )
        for failure in stats.failures:
            category_counts[failure.category.value] = (
                category_counts.get(failure.category.value, 0) + 1
            )
    if report_rows:
        sections.append(
            Section(
                "Transform Report",
                TableBody(
                    columns=("kind", "attempted", "succeeded", "success rate"),
                    rows=tuple(report_rows),
                ),
            )
        )
    if category_counts:
        sections.append(
            Section(
                "Failure Categories",
                TableBody(
                    columns=("category", "count"),
                    rows=tuple(
                        (name, str(count)) for name, count in sorted(category_counts.items())
                    ),
                ),
            )
        )
    if not sections:
        sections.append(Section("Summary", ParagraphBody("Dataset contains no rows.")))

    return ReportDocument(
        title="FHIR Data Report",
        sections=tuple(sections),
        generated_at=generated_at or datetime.now(timezone.utc),
        source_label=dataset.source_label,
    )
