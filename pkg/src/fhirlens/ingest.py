"""Acquire FHIR JSON from local files or live endpoints.

Both paths produce the same :class:`IngestBatch`, so normalization cannot
tell a saved bundle from a live searchset. Endpoint fetches follow the
bundle's ``next`` link sequentially up to a page cap; no resource bytes are
written anywhere, and the only outbound request goes to the caller's URL.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Optional

import requests

from . import __version__
from .errors import (
    EmptyBatch,
    FetchTimeout,
    HttpStatusError,
    InputTooLarge,
    MalformedJson,
    MissingResourceType,
    NetworkError,
    NotFhirJson,
)
from .model import (
    BUNDLE,
    MAX_INPUT_BYTES,
    BundleMeta,
    ResourceTree,
    classify_resource,
    extract_bundle_entries,
    parse_resource_tree,
    render_json,
)

ACCEPT_HEADER = "application/fhir+json"


def default_timeout_ms() -> int:
    raw = os.environ.get("FHIRLENS_TIMEOUT_MS", "")
    try:
        value = int(raw)
        return value if value >= 1 else 30000
    except ValueError:
        return 30000


@dataclass(frozen=True)
class FetchOptions:
    timeout_ms: int = field(default_factory=default_timeout_ms)
    max_pages: int = 10
    page_size_hint: Optional[int] = None
    retry_on_connect_failure: bool = False

    def __post_init__(self):
        if self.max_pages < 1:
            raise ValueError("max_pages must be >= 1")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be >= 1")


@dataclass(frozen=True)
class IngestSource:
    kind: str  # "file" | "endpoint"
    name: str
    query: str = ""

    @property
    def label(self) -> str:
        if self.kind == "file":
            return self.name
        return f"{self.name}?{self.query}" if self.query else self.name


@dataclass(frozen=True)
class IngestBatch:
    source: IngestSource
    resources: list[ResourceTree]
    bundle_meta: Optional[BundleMeta]
    fetched_pages: int
    ingest_duration_ms: float

    @property
    def source_label(self) -> str:
        return self.source.label


def load_local(data: bytes, name: str) -> IngestBatch:
    """Ingest one file/upload: a Bundle is unwrapped, anything else is a
    single-resource batch."""
    if len(data) > MAX_INPUT_BYTES:
        raise InputTooLarge(f"input is {len(data)} bytes; cap is {MAX_INPUT_BYTES}")
    started = time.perf_counter()
    tree = parse_resource_tree(data)
    meta: Optional[BundleMeta] = None
    if classify_resource(tree) == BUNDLE:
        meta, resources = extract_bundle_entries(tree)
        if not resources:
            raise EmptyBatch("bundle contains no usable entries")
    else:
        resources = [tree]
    duration = (time.perf_counter() - started) * 1000.0
    return IngestBatch(
        source=IngestSource("file", name),
        resources=resources,
        bundle_meta=meta,
        fetched_pages=0,
        ingest_duration_ms=duration,
    )


def next_page_url(meta: BundleMeta) -> Optional[str]:
    """URL of the first link whose relation is exactly "next"."""
    for relation, url in meta.links:
        if relation == "next":
            return url
    return None


def _request_headers() -> dict[str, str]:
    return {"Accept": ACCEPT_HEADER, "User-Agent": f"fhirlens/{__version__}"}


def _get(session: requests.Session, url: str, opts: FetchOptions) -> bytes:
    timeout = opts.timeout_ms / 1000.0
    attempts = 2 if opts.retry_on_connect_failure else 1
    for attempt in range(attempts):
        try:
            response = session.get(url, headers=_request_headers(), timeout=timeout)
            break
        except requests.Timeout as exc:
            raise FetchTimeout(f"request to {url} timed out after {opts.timeout_ms} ms") from exc
        except requests.ConnectionError as exc:
            if attempt + 1 < attempts:
                continue
            raise NetworkError(url, str(exc)) from exc
        except requests.RequestException as exc:
            raise NetworkError(url, str(exc)) from exc
    if response.status_code != 200:
        raise HttpStatusError(response.status_code, response.text[:1024])
    if len(response.content) > MAX_INPUT_BYTES:
        raise InputTooLarge(f"response exceeds {MAX_INPUT_BYTES} bytes")
    return response.content


def fetch_endpoint(
    base_url: str,
    resource_type: str,
    query: str = "",
    opts: Optional[FetchOptions] = None,
) -> IngestBatch:
    """GET ``{base_url}/{resource_type}?{query}`` and accumulate searchset
    pages by following "next" links, up to ``opts.max_pages`` requests."""
    opts = opts or FetchOptions()
    if not base_url.startswith(("http://", "https://")):
        raise NetworkError(base_url, "base URL must be absolute http(s)")

    url = f"{base_url.rstrip('/')}/{resource_type.strip('/')}"
    if query:
        url = f"{url}?{query.lstrip('?')}"

    started = time.perf_counter()
    session = requests.Session()
    session.max_redirects = 3

    resources: list[ResourceTree] = []
    first_meta: Optional[BundleMeta] = None
    pages = 0
    next_url: Optional[str] = url
    try:
        while next_url is not None and pages < opts.max_pages:
            body = _get(session, next_url, opts)
            pages += 1
            try:
                tree = parse_resource_tree(body)
            except (MalformedJson, MissingResourceType) as exc:
                raise NotFhirJson(f"response from {next_url} is not FHIR JSON: {exc}") from exc
            if classify_resource(tree) != BUNDLE:
                resources.append(tree)
                break
            meta, entries = extract_bundle_entries(tree)
            if first_meta is None:
                first_meta = meta
            resources.extend(entries)
            next_url = next_page_url(meta)
    finally:
        session.close()

    if not resources:
        raise EmptyBatch("endpoint returned no resources")
    duration = (time.perf_counter() - started) * 1000.0
    return IngestBatch(
        source=IngestSource("endpoint", base_url, f"{resource_type}?{query}" if query else resource_type),
        resources=resources,
        bundle_meta=first_meta,
        fetched_pages=pages,
        ingest_duration_ms=duration,
    )


def merged_bundle_json(batch: IngestBatch) -> str:
    """Re-serialize a batch as one searchset bundle (used by fetch --out)."""
    bundle_type = batch.bundle_meta.bundle_type if batch.bundle_meta else "collection"
    bundle = {
        "resourceType": "Bundle",
        "type": bundle_type or "collection",
        "total": len(batch.resources),
        "entry": [{"resource": tree.root} for tree in batch.resources],
    }
    return render_json(bundle, indent=2)
