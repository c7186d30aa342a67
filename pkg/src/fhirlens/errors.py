"""Exception taxonomy shared across the pipeline.

Every failure the toolkit can produce is a subclass of :class:`FhirlensError`,
so callers (CLI, HTTP service, tests) can catch one type and map it to an
exit code or HTTP status. Each class carries a stable machine-readable
``code`` used in API error bodies.
"""

from __future__ import annotations


class FhirlensError(Exception):
    """Base class for all categorized toolkit errors."""

    code = "Error"


class MalformedJson(FhirlensError):
    """Input bytes are not valid UTF-8 JSON."""

    code = "MalformedJson"

    def __init__(self, message: str, byte_offset: int = 0):
        super().__init__(f"{message} (byte offset {byte_offset})")
        self.byte_offset = byte_offset


class MissingResourceType(FhirlensError):
    """Valid JSON whose root lacks a string ``resourceType`` field."""

    code = "MissingResourceType"


class InputTooLarge(FhirlensError):
    """Input exceeds the per-ingest size cap."""

    code = "InputTooLarge"


class NotABundle(FhirlensError):
    code = "NotABundle"


class AmbiguousChoice(FhirlensError):
    """Two or more keys of one FHIR choice element are present."""

    code = "AmbiguousChoice"

    def __init__(self, prefix: str, keys: list[str]):
        super().__init__(f"choice element '{prefix}' has multiple keys: {', '.join(keys)}")
        self.prefix = prefix
        self.keys = list(keys)


class EmptyBatch(FhirlensError):
    code = "EmptyBatch"


class FetchError(FhirlensError):
    """Base class for endpoint retrieval failures."""

    code = "FetchError"


class NetworkError(FetchError):
    code = "NetworkError"

    def __init__(self, url: str, cause: str):
        super().__init__(f"request to {url} failed: {cause}")
        self.url = url
        self.cause = cause


class HttpStatusError(FetchError):
    code = "HttpStatusError"

    def __init__(self, status: int, body_excerpt: str):
        super().__init__(f"server returned HTTP {status}")
        self.status = status
        self.body_excerpt = body_excerpt[:1024]


class NotFhirJson(FetchError):
    """Endpoint response body is not parseable as a FHIR JSON resource."""

    code = "NotFhirJson"


class FetchTimeout(FetchError):
    code = "Timeout"


class SheetNameCollision(FhirlensError):
    code = "SheetNameCollision"


class TextEncodingError(FhirlensError):
    """A report heading contains no glyph renderable in the target encoding."""

    code = "TextEncodingError"
