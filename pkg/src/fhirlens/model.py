"""Core FHIR R4 resource model.

Parses raw JSON bytes into a generic resource tree, classifies resources by
``resourceType``, unwraps Bundles, and resolves choice-typed (``value[x]``)
elements into tagged values. Numbers are kept as :class:`JsonNumber`
(a Decimal remembering its exact source lexeme) so clinical quantities are
never reformatted on the way out.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Any, Iterator, Optional

from .errors import AmbiguousChoice, MalformedJson, MissingResourceType, NotABundle

MAX_INPUT_BYTES = 256 * 1024 * 1024
MAX_JSON_DEPTH = 200


def _check_depth(value: Any) -> None:
    # iterative walk: the recursive tree consumers stay within stack limits
    stack = [(value, 1)]
    while stack:
        node, depth = stack.pop()
        if depth > MAX_JSON_DEPTH:
            raise MalformedJson(f"nesting depth exceeds {MAX_JSON_DEPTH}")
        if isinstance(node, dict):
            stack.extend((v, depth + 1) for v in node.values())
        elif isinstance(node, list):
            stack.extend((v, depth + 1) for v in node)


class JsonNumber(Decimal):
    """Decimal subclass that remembers the exact JSON lexeme it came from."""

    __slots__ = ("text",)

    def __new__(cls, raw: str):
        self = super().__new__(cls, raw.strip())
        self.text = raw.strip()
        return self


def decimal_text(value: Decimal) -> str:
    """Original lexeme for parsed numbers, canonical Decimal string otherwise."""
    return value.text if isinstance(value, JsonNumber) else str(value)


def _reject_constant(name: str) -> float:
    raise ValueError(f"non-finite JSON constant {name!r} is not permitted")


def render_json(value: Any, indent: int | None = None) -> str:
    """Serialize a tree back to JSON, emitting numbers as their source lexemes.

    The stdlib encoder cannot inject raw numeric tokens, so this walks the
    tree itself. Object key order is preserved.
    """
    out: list[str] = []
    _render(value, out, indent, 0)
    return "".join(out)


def _render(value: Any, out: list[str], indent: int | None, depth: int) -> None:
    nl = "" if indent is None else "\n" + " " * (indent * (depth + 1))
    close_nl = "" if indent is None else "\n" + " " * (indent * depth)
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(value.items()):
            out.append(("," if i else "") + nl)
            out.append(json.dumps(str(k), ensure_ascii=False))
            out.append(": " if indent is not None else ":")
            _render(v, out, indent, depth + 1)
        out.append(close_nl + "}")
    elif isinstance(value, list):
        if not value:
            out.append("[]")
            return
        out.append("[")
        for i, v in enumerate(value):
            out.append(("," if i else "") + nl)
            _render(v, out, indent, depth + 1)
        out.append(close_nl + "]")
    elif isinstance(value, bool):
        out.append("true" if value else "false")
    elif value is None:
        out.append("null")
    elif isinstance(value, Decimal):
        out.append(decimal_text(value))
    elif isinstance(value, (int, float)):
        out.append(repr(value))
    else:
        out.append(json.dumps(str(value), ensure_ascii=False))


@dataclass(frozen=True)
class ResourceTree:
    """One parsed FHIR resource. Treated as read-only after construction."""

    root: dict
    source_offset: int = 0
    raw_size_bytes: int = 0

    @property
    def resource_type(self) -> str:
        return self.root["resourceType"]

    @property
    def resource_id(self) -> str:
        rid = self.root.get("id")
        return rid if isinstance(rid, str) else ""


_SUPPORTED_KINDS = ("Patient", "Observation", "Encounter", "DocumentReference")


@dataclass(frozen=True)
class ResourceKind:
    """Resource classification; unsupported kinds carry the verbatim name."""

    name: str

    @property
    def supported(self) -> bool:
        return self.name in _SUPPORTED_KINDS

    @property
    def is_bundle(self) -> bool:
        return self.name == "Bundle"

    def __str__(self) -> str:
        return self.name


PATIENT = ResourceKind("Patient")
OBSERVATION = ResourceKind("Observation")
ENCOUNTER = ResourceKind("Encounter")
DOCUMENT_REFERENCE = ResourceKind("DocumentReference")
BUNDLE = ResourceKind("Bundle")
SUPPORTED_KINDS = (PATIENT, OBSERVATION, ENCOUNTER, DOCUMENT_REFERENCE)


@dataclass(frozen=True)
class BundleMeta:
    bundle_type: str
    total: Optional[int]
    links: tuple[tuple[str, str], ...]
    skipped_entries: int = 0


class Precision(str, Enum):
    YEAR = "year"
    MONTH = "month"
    DAY = "day"
    SECOND = "second"
    MILLISECOND = "millisecond"


_TIME_RE = re.compile(
    r"^(\d{4})"
    r"(?:-(\d{2})"
    r"(?:-(\d{2})"
    r"(?:T(\d{2}):(\d{2}):(\d{2})"
    r"(?:\.(\d+))?"
    r"(Z|[+-]\d{2}:\d{2})?"
    r")?)?)?$"
)


@dataclass(frozen=True)
class TimePoint:
    """A FHIR date/dateTime kept verbatim, plus epoch millis when unambiguous.

    ``iso_text`` round-trips byte-identically; the epoch is only populated for
    day-or-finer precision. Timestamps lacking a zone are ordered as UTC
    (``has_timezone`` is False so callers can flag them).
    """

    iso_text: str
    precision: Precision
    epoch_millis_utc: Optional[int]
    has_timezone: bool = True


def parse_timepoint(text: str) -> Optional[TimePoint]:
    """Parse a FHIR date/dateTime/instant string; None if non-conformant."""
    if not isinstance(text, str):
        return None
    m = _TIME_RE.match(text)
    if not m:
        return None
    year, month, day, hh, mm, ss, frac, tz = m.groups()
    try:
        if day is not None:
            base = datetime(int(year), int(month), int(day), tzinfo=timezone.utc)
        elif month is not None:
            datetime(int(year), int(month), 1)
            return TimePoint(text, Precision.MONTH, None)
        else:
            datetime(int(year), 1, 1)
            return TimePoint(text, Precision.YEAR, None)
    except ValueError:
        return None

    if hh is None:
        return TimePoint(text, Precision.DAY, base_to_millis(base))

    hours, minutes, seconds = int(hh), int(mm), int(ss)
    if hours > 23 or minutes > 59 or seconds > 60:
        return None
    if seconds == 60:
        seconds = 59  # leap second: clamp for epoch math, text stays verbatim
    moment = base + timedelta(hours=hours, minutes=minutes, seconds=seconds)
    if tz and tz != "Z":
        sign = 1 if tz[0] == "+" else -1
        offset = timedelta(hours=int(tz[1:3]), minutes=int(tz[4:6]))
        moment -= sign * offset
    millis = base_to_millis(moment)
    precision = Precision.SECOND
    if frac:
        precision = Precision.MILLISECOND
        millis += int(frac[:3].ljust(3, "0"))
    return TimePoint(text, precision, millis, has_timezone=tz is not None)


def base_to_millis(dt: datetime) -> int:
    return int(dt.timestamp()) * 1000


@dataclass(frozen=True)
class Coding:
    system: Optional[str] = None
    code: Optional[str] = None
    display: Optional[str] = None

    @property
    def incomplete(self) -> bool:
        return self.system is None and self.code is None


def coding_from_json(obj: Any) -> Optional[Coding]:
    if not isinstance(obj, dict):
        return None
    system = obj.get("system") if isinstance(obj.get("system"), str) else None
    code = obj.get("code") if isinstance(obj.get("code"), str) else None
    display = obj.get("display") if isinstance(obj.get("display"), str) else None
    if system is None and code is None and display is None:
        return None
    return Coding(system, code, display)


class ValueKind(str, Enum):
    QUANTITY = "quantity"
    CODEABLE = "codeable"
    TEXT = "text"
    BOOLEAN = "boolean"
    INTEGER = "integer"
    DATETIME = "datetime"
    UNRENDERED = "unrendered"


@dataclass(frozen=True)
class Quantity:
    value: Decimal
    unit: str = ""
    system: Optional[str] = None
    code: Optional[str] = None

    @property
    def value_text(self) -> str:
        return decimal_text(self.value)


@dataclass(frozen=True)
class TypedValue:
    """Resolved choice-element value; exactly one payload is populated."""

    kind: ValueKind
    quantity: Optional[Quantity] = None
    text: Optional[str] = None
    codings: tuple[Coding, ...] = ()
    boolean: Optional[bool] = None
    integer: Optional[int] = None
    time: Optional[TimePoint] = None
    raw: Optional[str] = None

    def render(self) -> str:
        """Display string used in tables and exports."""
        if self.kind is ValueKind.QUANTITY:
            return self.quantity.value_text
        if self.kind is ValueKind.CODEABLE or self.kind is ValueKind.TEXT:
            return self.text or ""
        if self.kind is ValueKind.BOOLEAN:
            return "true" if self.boolean else "false"
        if self.kind is ValueKind.INTEGER:
            return str(self.integer)
        if self.kind is ValueKind.DATETIME:
            return self.time.iso_text
        return self.raw or ""


def _quantity_value(obj: Any) -> Optional[Quantity]:
    if not isinstance(obj, dict):
        return None
    value = obj.get("value")
    if isinstance(value, bool) or not isinstance(value, (int, Decimal)):
        return None
    dec = value if isinstance(value, Decimal) else Decimal(value)
    if not dec.is_finite():
        return None
    unit = obj.get("unit") if isinstance(obj.get("unit"), str) else ""
    system = obj.get("system") if isinstance(obj.get("system"), str) else None
    code = obj.get("code") if isinstance(obj.get("code"), str) else None
    return Quantity(dec, unit, system, code)


def codeable_text(obj: dict) -> tuple[str, tuple[Coding, ...]]:
    """Rendered display for a CodeableConcept: text, else first display/code."""
    codings = tuple(
        c for c in (coding_from_json(e) for e in _as_list(obj.get("coding"))) if c
    )
    text = obj.get("text")
    if isinstance(text, str) and text:
        return text, codings
    for c in codings:
        if c.display:
            return c.display, codings
    for c in codings:
        if c.code:
            return c.code, codings
    return "", codings


def _as_list(value: Any) -> list:
    return value if isinstance(value, list) else []


CHOICE_PRIORITY = ("Quantity", "CodeableConcept", "String", "Boolean", "Integer", "DateTime", "Period")


def choice_keys(obj: dict, prefix: str) -> list[str]:
    """All present keys of the choice element ``prefix[x]``, in priority order."""
    found = [
        k
        for k, v in obj.items()
        if isinstance(k, str)
        and k.startswith(prefix)
        and len(k) > len(prefix)
        and k[len(prefix)].isupper()
        and v is not None
    ]

    def rank(key: str) -> tuple[int, str]:
        suffix = key[len(prefix):]
        return (CHOICE_PRIORITY.index(suffix) if suffix in CHOICE_PRIORITY else len(CHOICE_PRIORITY), suffix)

    return sorted(found, key=rank)


def resolve_choice(obj: dict, prefix: str) -> Optional[TypedValue]:
    """Resolve a ``prefix[x]`` choice element on a JSON object.

    Raises AmbiguousChoice when more than one choice key is present (FHIR
    allows at most one). Unknown suffixes come back as UNRENDERED with the
    subtree serialized canonically.
    """
    keys = choice_keys(obj, prefix)
    if not keys:
        return None
    if len(keys) > 1:
        raise AmbiguousChoice(prefix, keys)
    key = keys[0]
    suffix = key[len(prefix):]
    value = obj[key]

    if suffix == "Quantity":
        q = _quantity_value(value)
        if q is not None:
            return TypedValue(ValueKind.QUANTITY, quantity=q)
    elif suffix == "CodeableConcept":
        if isinstance(value, dict):
            text, codings = codeable_text(value)
            return TypedValue(ValueKind.CODEABLE, text=text, codings=codings)
    elif suffix == "String":
        if isinstance(value, str):
            return TypedValue(ValueKind.TEXT, text=value)
    elif suffix == "Boolean":
        if isinstance(value, bool):
            return TypedValue(ValueKind.BOOLEAN, boolean=value)
    elif suffix == "Integer":
        if not isinstance(value, bool) and isinstance(value, (int, Decimal)):
            dec = Decimal(value) if not isinstance(value, Decimal) else value
            if dec == dec.to_integral_value():
                return TypedValue(ValueKind.INTEGER, integer=int(dec))
    elif suffix == "DateTime":
        tp = parse_timepoint(value) if isinstance(value, str) else None
        if tp is not None:
            return TypedValue(ValueKind.DATETIME, time=tp)
    return TypedValue(ValueKind.UNRENDERED, raw=render_json(value))


def parse_resource_tree(data: bytes) -> ResourceTree:
    """Parse UTF-8 FHIR JSON bytes into a resource tree.

    Decimal lexemes are preserved exactly; NaN/Infinity are rejected.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedJson(f"invalid UTF-8: {exc.reason}", exc.start) from exc
    try:
        root = json.loads(
            text,
            parse_float=JsonNumber,
            parse_int=JsonNumber,
            parse_constant=_reject_constant,
        )
    except RecursionError:
        raise MalformedJson("nesting too deep to parse") from None
    except ValueError as exc:
        pos = getattr(exc, "pos", 0) or 0
        byte_offset = len(text[:pos].encode("utf-8"))
        raise MalformedJson(str(exc).split(": line")[0], byte_offset) from exc
    _check_depth(root)
    if not isinstance(root, dict) or not isinstance(root.get("resourceType"), str):
        raise MissingResourceType("root object has no string 'resourceType' field")
    return ResourceTree(root=root, source_offset=0, raw_size_bytes=len(data))


def classify_resource(tree: ResourceTree) -> ResourceKind:
    return ResourceKind(tree.resource_type)


def extract_bundle_entries(tree: ResourceTree) -> tuple[BundleMeta, list[ResourceTree]]:
    """Unwrap ``Bundle.entry[].resource`` subtrees, preserving input order.

    Entries without a usable resource object are skipped and counted in the
    returned meta. Entry byte offsets are not recoverable from the stdlib
    parser, so children inherit the bundle's offset.
    """
    if classify_resource(tree) != BUNDLE:
        raise NotABundle(f"resourceType is {tree.resource_type!r}, not Bundle")
    root = tree.root
    bundle_type = root.get("type") if isinstance(root.get("type"), str) else ""
    total = None
    raw_total = root.get("total")
    if isinstance(raw_total, Decimal) and raw_total == raw_total.to_integral_value():
        total = int(raw_total)
    links = tuple(
        (link["relation"], link["url"])
        for link in _as_list(root.get("link"))
        if isinstance(link, dict)
        and isinstance(link.get("relation"), str)
        and isinstance(link.get("url"), str)
    )

    entries: list[ResourceTree] = []
    skipped = 0
    for entry in _as_list(root.get("entry")):
        resource = entry.get("resource") if isinstance(entry, dict) else None
        if isinstance(resource, dict) and isinstance(resource.get("resourceType"), str):
            entries.append(ResourceTree(root=resource, source_offset=tree.source_offset))
        else:
            skipped += 1
    meta = BundleMeta(bundle_type=bundle_type, total=total, links=links, skipped_entries=skipped)
    return meta, entries


def walk_extensions(root: dict) -> Iterator[tuple[str, Any]]:
    """Yield (path, element) for every member of any ``extension`` array.

    Recurses through the whole tree (including nested extensions) but skips
    ``contained`` resources, which normalization never inspects.
    """
    yield from _walk_ext(root, "")


def _walk_ext(node: Any, path: str) -> Iterator[tuple[str, Any]]:
    if isinstance(node, dict):
        for key, value in node.items():
            if key == "contained":
                continue
            child = f"{path}.{key}" if path else str(key)
            if key in ("extension", "modifierExtension") and isinstance(value, list):
                for i, element in enumerate(value):
                    yield f"{child}[{i}]", element
                    yield from _walk_ext(element, f"{child}[{i}]")
            else:
                yield from _walk_ext(value, child)
    elif isinstance(node, list):
        for i, element in enumerate(node):
            yield from _walk_ext(element, f"{path}[{i}]")
