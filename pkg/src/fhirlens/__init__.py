"""fhirlens: local-first FHIR R4 tables, series, and PDF/Excel reports."""

__version__ = "0.1.0"

from .errors import FhirlensError
from .ingest import fetch_endpoint, load_local
from .model import classify_resource, extract_bundle_entries, parse_resource_tree, resolve_choice
from .normalize import normalize_batch

__all__ = [
    "__version__",
    "FhirlensError",
    "parse_resource_tree",
    "classify_resource",
    "extract_bundle_entries",
    "resolve_choice",
    "load_local",
    "fetch_endpoint",
    "normalize_batch",
]
