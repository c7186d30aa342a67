"""Validation and tabular flattening of parsed resources.

Each supported resource kind gets a fixed row schema; every input resource is
accounted for exactly once in the resulting :class:`TransformReport`, either
as a success or as a categorized failure. Validation findings are split into
fatal ones (the resource is not normalized) and warnings (attached to rows).
"""

from __future__ import annotations

import re
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Optional

from .errors import AmbiguousChoice, EmptyBatch
from .ingest import IngestBatch
from .model import (
    BUNDLE,
    OBSERVATION,
    PATIENT,
    Coding,
    ResourceKind,
    ResourceTree,
    TimePoint,
    TypedValue,
    ValueKind,
    choice_keys,
    classify_resource,
    codeable_text,
    coding_from_json,
    parse_timepoint,
    resolve_choice,
    walk_extensions,
)


class ErrorCategory(str, Enum):
    MALFORMED_EXTENSION = "MalformedExtension"
    INCOMPLETE_CODING = "IncompleteCoding"
    MISSING_REQUIRED_FIELD = "MissingRequiredField"
    INVALID_DATE = "InvalidDate"
    AMBIGUOUS_CHOICE = "AmbiguousChoice"
    UNSUPPORTED_RESOURCE_TYPE = "UnsupportedResourceType"
    UNSUPPORTED_NESTING = "UnsupportedNesting"
    OTHER = "Other"


@dataclass(frozen=True)
class Finding:
    category: ErrorCategory
    path: str
    fatal: bool
    message: str = ""

    def render(self) -> str:
        text = f"{self.category.value} at {self.path}" if self.path else self.category.value
        return f"{text}: {self.message}" if self.message else text


@dataclass(frozen=True)
class PatientRow:
    resource_id: str
    name: str
    gender: str
    birth_date: str
    identifier_summary: str
    given_full: str = ""
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class ObservationRow:
    resource_id: str
    subject_ref: str
    status: str
    code_system: str
    code: str
    display: str
    effective: Optional[TimePoint]
    value: Optional[TypedValue]
    unit: str
    component_index: int
    component_code: Optional[str]
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class EncounterRow:
    resource_id: str
    status: str
    class_display: str
    type_display: str
    period_start: Optional[TimePoint]
    period_end: Optional[TimePoint]
    subject_ref: str
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class DocumentRow:
    resource_id: str
    doc_type: str
    status_combined: str
    date: Optional[TimePoint]
    author_ref: str
    content_excluded: bool
    warnings: tuple[str, ...] = ()


TABLE_COLUMNS: dict[str, tuple[str, ...]] = {
    "Patient": ("resource_id", "name", "gender", "birth_date", "identifier_summary", "given_full"),
    "Observation": (
        "resource_id",
        "subject_ref",
        "status",
        "code_system",
        "code",
        "display",
        "effective",
        "value",
        "unit",
        "component_index",
        "component_code",
    ),
    "Encounter": (
        "resource_id",
        "status",
        "class_display",
        "type_display",
        "period_start",
        "period_end",
        "subject_ref",
    ),
    "DocumentReference": (
        "resource_id",
        "doc_type",
        "status_combined",
        "date",
        "author_ref",
        "content_excluded",
    ),
}


def row_cells(row: Any) -> list[str]:
    """Render a row's exported columns as display strings, in column order."""
    cells: list[str] = []
    for name in TABLE_COLUMNS[_row_kind_name(row)]:
        cells.append(cell_text(getattr(row, name)))
    return cells


def cell_text(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, TimePoint):
        return value.iso_text
    if isinstance(value, TypedValue):
        return value.render()
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _row_kind_name(row: Any) -> str:
    return {
        PatientRow: "Patient",
        ObservationRow: "Observation",
        EncounterRow: "Encounter",
        DocumentRow: "DocumentReference",
    }[type(row)]


@dataclass(frozen=True)
class Failure:
    resource_index: int
    category: ErrorCategory
    message: str


@dataclass
class KindStats:
    attempted: int = 0
    succeeded: int = 0
    failures: list[Failure] = field(default_factory=list)
    warnings: list[tuple[int, str]] = field(default_factory=list)


@dataclass
class TransformReport:
    """Per-kind success/failure accounting for one normalization run."""

    per_kind: dict[ResourceKind, KindStats] = field(default_factory=dict)

    def stats(self, kind: ResourceKind) -> KindStats:
        return self.per_kind.setdefault(kind, KindStats())

    def success_rate(self, kind: ResourceKind) -> float:
        stats = self.per_kind.get(kind)
        if stats is None or stats.attempted == 0:
            return 1.0
        return stats.succeeded / stats.attempted

    @property
    def total_attempted(self) -> int:
        return sum(s.attempted for s in self.per_kind.values())

    @property
    def total_failures(self) -> int:
        return sum(len(s.failures) for s in self.per_kind.values())

    def to_json_dict(self) -> dict:
        kinds = []
        for kind, stats in self.per_kind.items():
            kinds.append(
                {
                    "kind": kind.name,
                    "attempted": stats.attempted,
                    "succeeded": stats.succeeded,
                    "success_rate": self.success_rate(kind),
                    "failures": [
                        {
                            "resource_index": f.resource_index,
                            "category": f.category.value,
                            "message": f.message,
                        }
                        for f in stats.failures
                    ],
                    "warnings": [
                        {"resource_index": i, "message": m} for i, m in stats.warnings
                    ],
                }
            )
        return {"kinds": kinds}


@dataclass(frozen=True)
class Dataset:
    """Normalized output: one table per resource kind plus the report."""

    id: str
    tables: dict[ResourceKind, list]
    report: TransformReport
    created_at: datetime
    source_label: str

    def table(self, kind: ResourceKind) -> list:
        return self.tables.get(kind, [])


_REQUIRED_FIELDS = {
    "Patient": "id",
    "Observation": "code",
    "Encounter": "status",
    "DocumentReference": "status",
}


def validate_resource(tree: ResourceTree) -> list[Finding]:
    """All validation findings for one resource; fatal ones abort its rows."""
    findings: list[Finding] = []
    root = tree.root
    kind = classify_resource(tree)

    if kind.is_bundle:
        findings.append(
            Finding(
                ErrorCategory.UNSUPPORTED_NESTING,
                "",
                fatal=True,
                message="Bundle nested inside a batch is not normalized",
            )
        )
        return findings

    required = _REQUIRED_FIELDS.get(kind.name)
    if required is not None:
        value = root.get(required)
        if value is None or (isinstance(value, str) and not value):
            findings.append(
                Finding(ErrorCategory.MISSING_REQUIRED_FIELD, required, fatal=True)
            )

    for path, element in walk_extensions(root):
        if not isinstance(element, dict) or not isinstance(element.get("url"), str):
            findings.append(
                Finding(
                    ErrorCategory.MALFORMED_EXTENSION,
                    path,
                    fatal=True,
                    message="extension lacks a url",
                )
            )

    if kind == OBSERVATION:
        findings.extend(_validate_observation(root))
    elif kind.name == "Patient":
        _check_date(root.get("birthDate"), "birthDate", findings)
    elif kind.name == "Encounter":
        findings.extend(_validate_encounter(root))
    elif kind.name == "DocumentReference":
        _check_date(root.get("date"), "date", findings)

    return findings


def _check_date(value: Any, path: str, findings: list[Finding]) -> None:
    if value is None:
        return
    if not isinstance(value, str) or parse_timepoint(value) is None:
        findings.append(
            Finding(ErrorCategory.INVALID_DATE, path, fatal=False, message="field dropped")
        )


def _check_choice(obj: dict, prefix: str, path: str, findings: list[Finding]) -> None:
    keys = choice_keys(obj, prefix)
    if len(keys) > 1:
        findings.append(
            Finding(
                ErrorCategory.AMBIGUOUS_CHOICE,
                path,
                fatal=True,
                message=f"multiple {prefix}[x] keys: {', '.join(keys)}",
            )
        )


def _incomplete_codings(concept: Any, path: str) -> list[str]:
    paths = []
    if isinstance(concept, dict) and isinstance(concept.get("coding"), list):
        for i, raw in enumerate(concept["coding"]):
            if not isinstance(raw, dict):
                continue
            system = raw.get("system") if isinstance(raw.get("system"), str) else None
            code = raw.get("code") if isinstance(raw.get("code"), str) else None
            if system is None and code is None:
                paths.append(f"{path}.coding[{i}]")
    return paths


def _validate_observation(root: dict) -> list[Finding]:
    findings: list[Finding] = []
    _check_choice(root, "value", "value[x]", findings)
    _check_choice(root, "effective", "effective[x]", findings)
    for p in _incomplete_codings(root.get("code"), "code"):
        findings.append(
            Finding(
                ErrorCategory.INCOMPLETE_CODING,
                p,
                fatal=True,
                message="coding has neither system nor code",
            )
        )
    components = root.get("component")
    if isinstance(components, list):
        for i, comp in enumerate(components):
            if not isinstance(comp, dict):
                continue
            _check_choice(comp, "value", f"component[{i}]", findings)
            for p in _incomplete_codings(comp.get("code"), f"component[{i}].code"):
                findings.append(
                    Finding(ErrorCategory.INCOMPLETE_CODING, p, fatal=False)
                )
    effective = root.get("effectiveDateTime")
    if effective is not None:
        _check_date(effective, "effectiveDateTime", findings)
    return findings


def _validate_encounter(root: dict) -> list[Finding]:
    findings: list[Finding] = []
    period = root.get("period")
    if isinstance(period, dict):
        start = _period_point(period, "start")
        end = _period_point(period, "end")
        if period.get("start") is not None and start is None:
            findings.append(Finding(ErrorCategory.INVALID_DATE, "period.start", fatal=False))
        if period.get("end") is not None and end is None:
            findings.append(Finding(ErrorCategory.INVALID_DATE, "period.end", fatal=False))
        if (
            start is not None
            and end is not None
            and start.epoch_millis_utc is not None
            and end.epoch_millis_utc is not None
            and end.epoch_millis_utc < start.epoch_millis_utc
        ):
            findings.append(
                Finding(
                    ErrorCategory.INVALID_DATE,
                    "period.end",
                    fatal=False,
                    message="end precedes start; end dropped",
                )
            )
    return findings


def _period_point(period: dict, key: str) -> Optional[TimePoint]:
    raw = period.get(key)
    return parse_timepoint(raw) if isinstance(raw, str) else None


_WS = re.compile(r"\s+")


def _collapse(text: str) -> str:
    return _WS.sub(" ", text).strip()


def _capitalize(text: str) -> str:
    return text[:1].upper() + text[1:] if text else ""


def normalize_patient(tree: ResourceTree) -> PatientRow:
    """Flatten a Patient: display name uses first given + family (the full
    given list is kept in an auxiliary column)."""
    root = tree.root
    names = [n for n in _list_of_dicts(root.get("name"))]
    chosen = next((n for n in names if n.get("use") == "usual"), names[0] if names else None)

    display = ""
    given_full = ""
    if chosen is not None:
        given = [g for g in _as_str_list(chosen.get("given"))]
        family = chosen.get("family") if isinstance(chosen.get("family"), str) else ""
        given_full = _collapse(" ".join(given))
        display = _collapse(f"{given[0] if given else ''} {family}")
        if not display and isinstance(chosen.get("text"), str):
            display = _collapse(chosen["text"])

    gender = root.get("gender")
    birth = root.get("birthDate")
    birth_tp = parse_timepoint(birth) if isinstance(birth, str) else None

    idents = []
    for ident in _list_of_dicts(root.get("identifier")):
        value = ident.get("value")
        if not isinstance(value, str) or not value:
            continue
        system = ident.get("system")
        idents.append(f"{system}|{value}" if isinstance(system, str) and system else value)

    return PatientRow(
        resource_id=tree.resource_id,
        name=display,
        gender=_capitalize(gender) if isinstance(gender, str) else "",
        birth_date=birth_tp.iso_text if birth_tp else "",
        identifier_summary="; ".join(idents),
        given_full=given_full,
    )


def _select_coding(concept: Any) -> Optional[Coding]:
    """First coding carrying both system and code; ordered scan."""
    if not isinstance(concept, dict):
        return None
    for raw in concept.get("coding") or []:
        c = coding_from_json(raw)
        if c and c.system and c.code:
            return c
    return None


def _concept_display(concept: Any, selected: Optional[Coding]) -> str:
    if selected and selected.display:
        return selected.display
    if isinstance(concept, dict):
        text = concept.get("text")
        if isinstance(text, str):
            return text
    return ""


def _effective_timepoint(root: dict) -> Optional[TimePoint]:
    resolved = resolve_choice(root, "effective")
    if resolved is None:
        return None
    if resolved.kind is ValueKind.DATETIME:
        return resolved.time
    # instants and period starts still carry a usable moment
    raw = root.get("effectiveInstant")
    if isinstance(raw, str):
        return parse_timepoint(raw)
    period = root.get("effectivePeriod")
    if isinstance(period, dict) and isinstance(period.get("start"), str):
        return parse_timepoint(period["start"])
    return None


def normalize_observation(tree: ResourceTree) -> list[ObservationRow]:
    """One row for the root value (index 0) plus one per component, in order."""
    root = tree.root
    subject = root.get("subject")
    subject_ref = ""
    if isinstance(subject, dict) and isinstance(subject.get("reference"), str):
        subject_ref = subject["reference"]
    status = root.get("status") if isinstance(root.get("status"), str) else ""

    selected = _select_coding(root.get("code"))
    code_system = selected.system if selected else ""
    code = selected.code if selected else ""
    display = _concept_display(root.get("code"), selected)
    effective = _effective_timepoint(root)

    base = dict(
        resource_id=tree.resource_id,
        subject_ref=subject_ref,
        status=status,
        code_system=code_system,
        code=code,
        display=display,
        effective=effective,
    )

    rows: list[ObservationRow] = []
    root_value = resolve_choice(root, "value")
    if root_value is not None:
        unit = root_value.quantity.unit if root_value.kind is ValueKind.QUANTITY else ""
        rows.append(
            ObservationRow(
                **base, value=root_value, unit=unit, component_index=0, component_code=None
            )
        )

    for index, comp in enumerate(_list_of_dicts(root.get("component")), start=1):
        comp_value = resolve_choice(comp, "value")
        comp_coding = _select_coding(comp.get("code"))
        comp_code = comp_coding.code if comp_coding else _concept_text(comp.get("code"))
        comp_display = _concept_display(comp.get("code"), comp_coding) or display
        unit = ""
        if comp_value is not None and comp_value.kind is ValueKind.QUANTITY:
            unit = comp_value.quantity.unit
        fields = dict(base, display=comp_display)
        rows.append(
            ObservationRow(
                **fields,
                value=comp_value,
                unit=unit,
                component_index=index,
                component_code=comp_code,
            )
        )
    return rows


def _concept_text(concept: Any) -> Optional[str]:
    if isinstance(concept, dict) and isinstance(concept.get("text"), str):
        return concept["text"]
    return None


def normalize_encounter(tree: ResourceTree) -> EncounterRow:
    root = tree.root
    klass = root.get("class")
    class_display = ""
    if isinstance(klass, dict):
        c = coding_from_json(klass)
        if c:
            class_display = c.display or c.code or ""

    type_display = ""
    for concept in _list_of_dicts(root.get("type")):
        text, codings = codeable_text(concept)
        if text:
            type_display = text
            break

    period = root.get("period") if isinstance(root.get("period"), dict) else {}
    start = _period_point(period, "start")
    end = _period_point(period, "end")
    if (
        start is not None
        and end is not None
        and start.epoch_millis_utc is not None
        and end.epoch_millis_utc is not None
        and end.epoch_millis_utc < start.epoch_millis_utc
    ):
        end = None

    subject = root.get("subject")
    subject_ref = ""
    if isinstance(subject, dict) and isinstance(subject.get("reference"), str):
        subject_ref = subject["reference"]

    return EncounterRow(
        resource_id=tree.resource_id,
        status=root.get("status") if isinstance(root.get("status"), str) else "",
        class_display=class_display,
        type_display=type_display,
        period_start=start,
        period_end=end,
        subject_ref=subject_ref,
    )


def normalize_document_reference(tree: ResourceTree) -> DocumentRow:
    """Flatten metadata only; embedded attachment payloads are never copied."""
    root = tree.root
    selected = _select_coding(root.get("type"))
    doc_type = _concept_display(root.get("type"), selected)
    if not doc_type and isinstance(root.get("type"), dict):
        first = next(iter(_list_of_dicts(root["type"].get("coding"))), None)
        c = coding_from_json(first) if first else None
        doc_type = (c.display or c.code or "") if c else ""

    status = root.get("status") if isinstance(root.get("status"), str) else ""
    doc_status = root.get("docStatus") if isinstance(root.get("docStatus"), str) else ""
    combined = _capitalize(status)
    if doc_status:
        combined = f"{combined} / {_capitalize(doc_status)}"

    date = parse_timepoint(root.get("date")) if isinstance(root.get("date"), str) else None

    author_ref = ""
    for author in _list_of_dicts(root.get("author")):
        if isinstance(author.get("reference"), str):
            author_ref = author["reference"]
            break

    excluded = False
    for content in _list_of_dicts(root.get("content")):
        attachment = content.get("attachment")
        if isinstance(attachment, dict) and isinstance(attachment.get("data"), str):
            excluded = True
            break

    return DocumentRow(
        resource_id=tree.resource_id,
        doc_type=doc_type,
        status_combined=combined,
        date=date,
        author_ref=author_ref,
        content_excluded=excluded,
    )


def _list_of_dicts(value: Any) -> list[dict]:
    if not isinstance(value, list):
        return []
    return [v for v in value if isinstance(v, dict)]


def _as_str_list(value: Any) -> list[str]:
    if not isinstance(value, list):
        return []
    return [v for v in value if isinstance(v, str)]


_NORMALIZERS = {
    "Patient": normalize_patient,
    "Encounter": normalize_encounter,
    "DocumentReference": normalize_document_reference,
}


def normalize_batch(batch: IngestBatch) -> Dataset:
    """Normalize every resource in a batch, dispatching by kind.

    Deterministic apart from the freshly generated dataset id and timestamp:
    identical inputs yield identical tables and report counts.
    """
    if not batch.resources:
        raise EmptyBatch("batch contains no resources")

    report = TransformReport()
    tables: dict[ResourceKind, list] = {}

    for index, tree in enumerate(batch.resources):
        kind = classify_resource(tree)
        stats = report.stats(kind)
        stats.attempted += 1

        if kind.is_bundle:
            stats.failures.append(
                Failure(index, ErrorCategory.UNSUPPORTED_NESTING, "nested Bundle entry")
            )
            continue
        if not kind.supported:
            stats.failures.append(
                Failure(
                    index,
                    ErrorCategory.UNSUPPORTED_RESOURCE_TYPE,
                    f"resourceType {kind.name!r} is not supported",
                )
            )
            continue

        findings = validate_resource(tree)
        fatal = next((f for f in findings if f.fatal), None)
        if fatal is not None:
            stats.failures.append(Failure(index, fatal.category, fatal.render()))
            continue

        warnings = tuple(f.render() for f in findings)
        try:
            if kind == OBSERVATION:
                rows = normalize_observation(tree)
                if not rows:
                    stats.warnings.append((index, "NoValue: no value and no components"))
                if warnings:
                    rows = [replace(r, warnings=warnings) for r in rows]
                tables.setdefault(kind, []).extend(rows)
            else:
                row = _NORMALIZERS[kind.name](tree)
                if warnings:
                    row = replace(row, warnings=warnings)
                tables.setdefault(kind, []).append(row)
        except AmbiguousChoice as exc:
            # validation walks the same choice elements, so this is unreachable
            # for conformant dispatch; kept as a hard backstop for fuzzed input
            stats.failures.append(Failure(index, ErrorCategory.AMBIGUOUS_CHOICE, str(exc)))
            continue
        stats.succeeded += 1

    tables = {k: v for k, v in tables.items() if v}
    return Dataset(
        id=uuid.uuid4().hex,
        tables=tables,
        report=report,
        created_at=datetime.now(timezone.utc),
        source_label=batch.source_label,
    )
