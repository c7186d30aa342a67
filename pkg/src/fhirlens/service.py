"""Loopback HTTP service exposing the pipeline to the browser UI.

Datasets live in a bounded in-memory LRU store and are never written to
disk; ids are 128-bit random values returned only to the creator. The
service makes no outbound request except the endpoint named in a
POST /api/fetch body, and binds to 127.0.0.1 unless told otherwise.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import os
import re
import threading
from collections import OrderedDict
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlsplit

from . import __version__
from .errors import (
    EmptyBatch,
    FetchTimeout,
    FhirlensError,
    HttpStatusError,
    InputTooLarge,
    MalformedJson,
    MissingResourceType,
    NetworkError,
    NotFhirJson,
)
from .exports import export_dataset
from .ingest import FetchOptions, fetch_endpoint, load_local
from .model import MAX_INPUT_BYTES
from .normalize import TABLE_COLUMNS, Dataset, normalize_batch, row_cells
from .series import extract_series

logger = logging.getLogger("fhirlens.service")

DEFAULT_PORT = 7423
STORE_CAPACITY = 32

_DATASET_PATH = re.compile(r"^/api/datasets/([0-9a-f]{32})/(tables/([A-Za-z]+)|series|export)$")


def default_port() -> int:
    raw = os.environ.get("FHIRLENS_PORT", "")
    try:
        return int(raw)
    except ValueError:
        return DEFAULT_PORT


class DatasetStore:
    """Bounded LRU map of dataset id -> Dataset; no persistence."""

    def __init__(self, capacity: int = STORE_CAPACITY):
        self.capacity = capacity
        self._lock = threading.Lock()
        self._data: OrderedDict[str, Dataset] = OrderedDict()

    def put(self, dataset: Dataset) -> None:
        with self._lock:
            self._data[dataset.id] = dataset
            self._data.move_to_end(dataset.id)
            while len(self._data) > self.capacity:
                self._data.popitem(last=False)

    def get(self, dataset_id: str) -> Optional[Dataset]:
        with self._lock:
            dataset = self._data.get(dataset_id)
            if dataset is not None:
                self._data.move_to_end(dataset_id)
            return dataset

    def __len__(self) -> int:
        with self._lock:
            return len(self._data)


class FhirlensServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, store: DatasetStore, ui_dir: Optional[Path]):
        self.store = store
        self.ui_dir = ui_dir
        super().__init__(address, RequestHandler)


def _error_status(exc: FhirlensError) -> int:
    if isinstance(exc, InputTooLarge):
        return 413
    if isinstance(exc, FetchTimeout):
        return 504
    if isinstance(exc, (NetworkError, HttpStatusError, NotFhirJson)):
        return 502
    if isinstance(exc, (MalformedJson, MissingResourceType, EmptyBatch)):
        return 400
    return 400


class RequestHandler(BaseHTTPRequestHandler):
    server_version = f"fhirlens/{__version__}"
    protocol_version = "HTTP/1.1"

    # --- plumbing -----------------------------------------------------

    def log_message(self, fmt, *args):
        logger.debug("%s %s", self.address_string(), fmt % args)

    def _send(self, status: int, content_type: str, body: bytes, extra: dict | None = None):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        for key, value in (extra or {}).items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, payload: dict):
        self._send(status, "application/json", json.dumps(payload).encode("utf-8"))

    def _send_api_error(self, status: int, code: str, message: str, detail_path: str | None = None):
        body = {"code": code, "message": message}
        if detail_path:
            body["detail_path"] = detail_path
        self._send_json(status, body)

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        if length > MAX_INPUT_BYTES:
            raise InputTooLarge(f"request body is {length} bytes")
        return self.rfile.read(length)

    # --- routing ------------------------------------------------------

    def do_POST(self):
        parts = urlsplit(self.path)
        try:
            if parts.path == "/api/ingest":
                self._handle_ingest(parse_qs(parts.query))
            elif parts.path == "/api/fetch":
                self._handle_fetch()
            else:
                self._send_api_error(404, "NotFound", f"no such endpoint {parts.path}")
        except FhirlensError as exc:
            self._send_api_error(_error_status(exc), exc.code, str(exc))
        except Exception:
            logger.exception("unhandled error for %s", self.path)
            self._send_api_error(500, "Internal", "internal error")

    def do_GET(self):
        parts = urlsplit(self.path)
        try:
            match = _DATASET_PATH.match(parts.path)
            if match:
                self._handle_dataset(match, parse_qs(parts.query))
            elif parts.path.startswith("/api/"):
                self._send_api_error(404, "NotFound", f"no such endpoint {parts.path}")
            else:
                self._handle_static(parts.path)
        except FhirlensError as exc:
            self._send_api_error(_error_status(exc), exc.code, str(exc))
        except Exception:
            logger.exception("unhandled error for %s", self.path)
            self._send_api_error(500, "Internal", "internal error")

    # --- handlers -----------------------------------------------------

    def _handle_ingest(self, query: dict):
        body = self._read_body()
        name = (query.get("name") or ["upload"])[0]
        batch = load_local(body, name)
        dataset = normalize_batch(batch)
        self.server.store.put(dataset)
        self._send_json(
            200, {"dataset_id": dataset.id, "report": dataset.report.to_json_dict()}
        )

    def _handle_fetch(self):
        raw = self._read_body()
        try:
            payload = json.loads(raw.decode("utf-8"))
            base_url = payload["base_url"]
            resource_type = payload.get("resource_type", "")
        except (ValueError, KeyError, UnicodeDecodeError):
            self._send_api_error(400, "BadRequest", "body must be JSON with base_url")
            return
        if not isinstance(base_url, str) or not base_url.startswith(("http://", "https://")):
            self._send_api_error(400, "BadRequest", "base_url must be absolute http(s)")
            return
        opts_kwargs = {}
        if payload.get("max_pages") is not None:
            try:
                opts_kwargs["max_pages"] = int(payload["max_pages"])
            except (TypeError, ValueError):
                self._send_api_error(400, "BadRequest", "max_pages must be an integer")
                return
        try:
            opts = FetchOptions(**opts_kwargs)
        except ValueError as exc:
            self._send_api_error(400, "BadRequest", str(exc))
            return
        batch = fetch_endpoint(base_url, str(resource_type), str(payload.get("query", "")), opts)
        dataset = normalize_batch(batch)
        self.server.store.put(dataset)
        self._send_json(
            200,
            {
                "dataset_id": dataset.id,
                "report": dataset.report.to_json_dict(),
                "fetched_pages": batch.fetched_pages,
            },
        )

    def _handle_dataset(self, match: re.Match, query: dict):
        dataset = self.server.store.get(match.group(1))
        if dataset is None:
            self._send_api_error(404, "NotFound", "unknown dataset id")
            return
        route = match.group(2)
        if route == "series":
            self._send_json(200, extract_series(dataset).to_json_dict())
        elif route == "export":
            self._handle_export(dataset, query)
        else:
            self._handle_table(dataset, match.group(3), query)

    def _handle_table(self, dataset: Dataset, kind_name: str, query: dict):
        if kind_name not in TABLE_COLUMNS:
            self._send_api_error(404, "NotFound", f"unknown resource kind {kind_name!r}")
            return
        try:
            offset = int((query.get("offset") or ["0"])[0])
            limit = int((query.get("limit") or ["100"])[0])
        except ValueError:
            self._send_api_error(400, "BadRequest", "offset and limit must be integers")
            return
        if offset < 0 or limit < 1 or limit > 1000:
            self._send_api_error(400, "BadRequest", "offset must be >= 0 and 1 <= limit <= 1000")
            return
        from .exports import KIND_BY_NAME

        rows = dataset.table(KIND_BY_NAME[kind_name])
        page = rows[offset:offset + limit]
        self._send_json(
            200,
            {
                "columns": list(TABLE_COLUMNS[kind_name]),
                "rows": [row_cells(r) for r in page],
                "total": len(rows),
            },
        )

    def _handle_export(self, dataset: Dataset, query: dict):
        fmt = (query.get("format") or [""])[0]
        kind = (query.get("kind") or [None])[0]
        fixed = (query.get("fixed_timestamp") or ["0"])[0] in ("1", "true")
        try:
            body, media_type, filename = export_dataset(
                dataset, fmt, kind=kind, fixed_timestamp=fixed
            )
        except ValueError as exc:
            self._send_api_error(400, "BadRequest", str(exc))
            return
        self._send(
            200,
            media_type,
            body,
            {"Content-Disposition": f'attachment; filename="{filename}"'},
        )

    def _handle_static(self, path: str):
        ui_dir = self.server.ui_dir
        if ui_dir is None:
            self._send_api_error(404, "NotFound", "no UI assets configured")
            return
        relative = path.lstrip("/") or "index.html"
        target = (ui_dir / relative).resolve()
        if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
            self._send_api_error(404, "NotFound", f"no such file {path}")
            return
        content_type = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self._send(200, content_type, target.read_bytes())


def default_ui_dir() -> Optional[Path]:
    bundled = Path(__file__).parent / "static"
    return bundled if bundled.is_dir() else None


def create_server(
    host: str = "127.0.0.1",
    port: int | None = None,
    ui_dir: Path | None = None,
    store: DatasetStore | None = None,
) -> FhirlensServer:
    return FhirlensServer(
        (host, port if port is not None else default_port()),
        store=store or DatasetStore(),
        ui_dir=ui_dir if ui_dir is not None else default_ui_dir(),
    )
