"""Minimal from-scratch PDF 1.4 writer for tabular reports.

Emits uncompressed content streams using only text operators and rectangle
strokes, the base-14 Helvetica fonts (WinAnsi encoding, no embedding), and a
classic xref table with byte-exact offsets. Output is deterministic for a
fixed report timestamp.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass, field

from . import _kernels as kernels
from .errors import TextEncodingError
from .report import Body, KeyValueBody, ParagraphBody, ReportDocument, TableBody


@dataclass(frozen=True)
class PageMetrics:
    """A4 geometry and the fixed type scale used by reports."""

    page_width: float = 595.0
    page_height: float = 842.0
    margin: float = 36.0
    base_font_size: float = 10.0
    heading_font_size: float = 14.0
    cell_padding: float = 4.0

    @property
    def content_width(self) -> float:
        return self.page_width - 2 * self.margin


# Adobe core-14 advance widths (1/1000 em) for the printable ASCII range;
# accented/high WinAnsi positions use the lowercase average, which only
# affects wrap estimates, not document validity.
_HELV_ASCII = (
    278, 278, 355, 556, 556, 889, 667, 191, 333, 333, 389, 584, 278, 333,
    278, 278, 556, 556, 556, 556, 556, 556, 556, 556, 556, 556, 278, 278,
    584, 584, 584, 556, 1015, 667, 667, 722, 722, 667, 611, 778, 722, 278,
    500, 667, 556, 833, 722, 778, 667, 778, 722, 667, 611, 722, 667, 944,
    667, 667, 611, 278, 278, 278, 469, 556, 333, 556, 556, 500, 556, 556,
    278, 556, 556, 222, 222, 500, 222, 833, 556, 556, 556, 556, 333, 500,
    278, 556, 500, 722, 500, 500, 500, 334, 260, 334, 584,
)
_HELV_BOLD_ASCII = (
    278, 333, 474, 556, 556, 889, 722, 238, 333, 333, 389, 584, 278, 333,
    278, 278, 556, 556, 556, 556, 556, 556, 556, 556, 556, 556, 333, 333,
    584, 584, 584, 611, 975, 722, 722, 722, 722, 667, 611, 778, 722, 278,
    556, 722, 611, 833, 722, 778, 667, 778, 722, 667, 611, 722, 667, 944,
    667, 667, 611, 333, 278, 333, 584, 556, 333, 556, 611, 556, 611, 556,
    333, 611, 611, 278, 278, 556, 278, 889, 611, 611, 611, 611, 389, 556,
    333, 611, 556, 778, 556, 556, 500, 389, 280, 389, 584,
)


def _width_table(ascii_widths: tuple, high_default: int) -> array:
    table = [0] * 32 + list(ascii_widths)
    table += [high_default] * (256 - len(table))
    return array("H", table)


FONT_WIDTHS = {
    "F1": _width_table(_HELV_ASCII, 556),
    "F2": _width_table(_HELV_BOLD_ASCII, 611),
}
REGULAR, BOLD = "F1", "F2"


def _num(value: float) -> str:
    text = f"{value:.2f}".rstrip("0").rstrip(".")
    return text or "0"


@dataclass(frozen=True)
class _TextRun:
    x: float
    y_top: float
    font: str
    size: float
    data: bytes


@dataclass(frozen=True)
class _Rect:
    x: float
    y_top: float
    w: float
    h: float


@dataclass
class _Page:
    runs: list = field(default_factory=list)
    rects: list = field(default_factory=list)


class _Layout:
    """Top-down cursor layout over a growing list of pages."""

    def __init__(self, metrics: PageMetrics):
        self.m = metrics
        self.pages: list[_Page] = [_Page()]
        self.y = metrics.margin
        self.replaced = 0
        # reserve room above the bottom margin for the footer line
        self.body_bottom = metrics.page_height - metrics.margin

    @property
    def page(self) -> _Page:
        return self.pages[-1]

    def new_page(self) -> None:
        self.pages.append(_Page())
        self.y = self.m.margin

    def ensure(self, height: float) -> None:
        if self.y + height > self.body_bottom and self.y > self.m.margin:
            self.new_page()

    def encode(self, text: str) -> bytes:
        data, replaced = kernels.winansi_encode(text)
        self.replaced += replaced
        return data

    def text(self, x: float, text: str, font: str, size: float) -> None:
        self.page.runs.append(_TextRun(x, self.y, font, size, self.encode(text)))

    def advance(self, dy: float) -> None:
        self.y += dy


def _line_height(size: float) -> float:
    return size * 1.3


def _wrap(data: bytes, font: str, size: float, max_width: float) -> list[bytes]:
    """Word-wrap an encoded string; words wider than the box are hard-broken."""
    if not data:
        return [b""]
    widths = FONT_WIDTHS[font]
    limit = max_width * 1000.0 / size
    lines: list[bytes] = []
    current = bytearray()
    current_w = 0
    space_w = widths[0x20]

    for word in data.split(b" "):
        word_w = kernels.text_width(word, widths)
        if word_w > limit:
            # flush, then break the word glyph by glyph
            if current:
                lines.append(bytes(current))
                current = bytearray()
                current_w = 0
            piece = bytearray()
            piece_w = 0
            for b in word:
                w = widths[b]
                if piece and piece_w + w > limit:
                    lines.append(bytes(piece))
                    piece = bytearray()
                    piece_w = 0
                piece.append(b)
                piece_w += w
            current = piece
            current_w = piece_w
            continue
        extra = word_w if not current else space_w + word_w
        if current and current_w + extra > limit:
            lines.append(bytes(current))
            current = bytearray(word)
            current_w = word_w
        else:
            if current:
                current.extend(b" ")
            current.extend(word)
            current_w += extra
    lines.append(bytes(current))
    return lines


def _column_widths(
    columns: tuple[str, ...], rows, font: str, size: float, metrics: PageMetrics
) -> list[float]:
    widths_table = FONT_WIDTHS[font]
    bold_table = FONT_WIDTHS[BOLD]
    pad = metrics.cell_padding
    natural: list[float] = []
    for i, header in enumerate(columns):
        encoded, _ = kernels.winansi_encode(header)
        best = kernels.text_width(encoded, bold_table) * size / 1000.0
        for row in rows:
            encoded, _ = kernels.winansi_encode(row[i])
            best = max(best, kernels.text_width(encoded, widths_table) * size / 1000.0)
        natural.append(min(best + 2 * pad, metrics.content_width))

    total = sum(natural) or 1.0
    factor = metrics.content_width / total
    if factor >= 1.0:
        return [w * factor for w in natural]
    floor = min(40.0, metrics.content_width / max(len(columns), 1))
    scaled = [max(floor, w * factor) for w in natural]
    overflow = sum(scaled) - metrics.content_width
    if overflow > 0:
        flexible = [i for i, w in enumerate(scaled) if w > floor]
        flex_total = sum(scaled[i] - floor for i in flexible) or 1.0
        for i in flexible:
            scaled[i] -= overflow * (scaled[i] - floor) / flex_total
    return scaled


def _layout_table(layout: _Layout, body: TableBody, metrics: PageMetrics) -> None:
    size = metrics.base_font_size
    pad = metrics.cell_padding
    line_h = _line_height(size)
    col_w = _column_widths(body.columns, body.rows, REGULAR, size, metrics)

    header_cells = [
        _wrap(layout.encode(h), BOLD, size, col_w[i] - 2 * pad)
        for i, h in enumerate(body.columns)
    ]
    _emit_band(layout, header_cells, col_w, BOLD, size, metrics, ensure_extra=line_h + 2 * pad)

    for row in body.rows:
        cells = [
            _wrap(layout.encode(cell), REGULAR, size, col_w[i] - 2 * pad)
            for i, cell in enumerate(row)
        ]
        _emit_band(layout, cells, col_w, REGULAR, size, metrics)
    layout.advance(8)


def _emit_band(
    layout: _Layout,
    cells: list[list[bytes]],
    col_w: list[float],
    font: str,
    size: float,
    metrics: PageMetrics,
    ensure_extra: float = 0.0,
) -> None:
    """Draw one logical row, splitting across pages when its lines overflow."""
    pad = metrics.cell_padding
    line_h = _line_height(size)
    remaining = [list(c) for c in cells]
    first = True
    while any(remaining):
        if first:
            # keep whole rows on one page; rows taller than a page still split
            needed = max(len(c) for c in remaining) * line_h + 2 * pad
            layout.ensure(needed + ensure_extra)
            first = False
        else:
            layout.ensure(line_h + 2 * pad)
        room = layout.body_bottom - layout.y - 2 * pad
        fit = max(1, int(room // line_h))
        take = min(fit, max(len(c) for c in remaining))
        band_h = take * line_h + 2 * pad

        x = metrics.margin
        for i, lines in enumerate(remaining):
            layout.page.rects.append(_Rect(x, layout.y, col_w[i], band_h))
            for j, data in enumerate(lines[:take]):
                if data:
                    layout.page.runs.append(
                        _TextRun(x + pad, layout.y + pad + j * line_h, font, size, data)
                    )
            remaining[i] = lines[take:]
            x += col_w[i]
        layout.advance(band_h)


def _layout_keyvalues(layout: _Layout, body: KeyValueBody, metrics: PageMetrics) -> None:
    size = metrics.base_font_size
    pad = metrics.cell_padding
    line_h = _line_height(size)
    bold = FONT_WIDTHS[BOLD]
    label_w = 0.0
    for label, _ in body.pairs:
        encoded, _n = kernels.winansi_encode(label)
        label_w = max(label_w, kernels.text_width(encoded, bold) * size / 1000.0)
    label_w = min(label_w + 2 * pad, 200.0)
    value_w = metrics.content_width - label_w

    for label, value in body.pairs:
        value_lines = _wrap(layout.encode(value), REGULAR, size, value_w - 2 * pad)
        height = len(value_lines) * line_h + 2
        layout.ensure(height)
        layout.page.runs.append(
            _TextRun(metrics.margin, layout.y, BOLD, size, layout.encode(label))
        )
        for j, data in enumerate(value_lines):
            if data:
                layout.page.runs.append(
                    _TextRun(
                        metrics.margin + label_w, layout.y + j * line_h, REGULAR, size, data
                    )
                )
        layout.advance(height)
    layout.advance(8)


def _layout_paragraph(layout: _Layout, body: ParagraphBody, metrics: PageMetrics) -> None:
    size = metrics.base_font_size
    line_h = _line_height(size)
    for data in _wrap(layout.encode(body.text), REGULAR, size, metrics.content_width):
        layout.ensure(line_h)
        if data:
            layout.page.runs.append(_TextRun(metrics.margin, layout.y, REGULAR, size, data))
        layout.advance(line_h)
    layout.advance(8)


def _check_heading(text: str) -> None:
    _, replaced = kernels.winansi_encode(text)
    stripped = text.replace(" ", "")
    if stripped and replaced >= len(stripped):
        raise TextEncodingError(f"heading {text!r} has no encodable glyphs")


def render_pdf(doc: ReportDocument, metrics: PageMetrics | None = None) -> bytes:
    """Render a report document to PDF bytes. Deterministic for a fixed
    ``doc.generated_at``."""
    metrics = metrics or PageMetrics()
    layout = _Layout(metrics)

    _check_heading(doc.title)
    layout.ensure(metrics.heading_font_size * 1.6)
    layout.text(metrics.margin, doc.title, BOLD, metrics.heading_font_size + 2)
    layout.advance((metrics.heading_font_size + 2) * 1.6)

    for section in doc.sections:
        _check_heading(section.heading)
        layout.ensure(metrics.heading_font_size * 1.5 + _line_height(metrics.base_font_size))
        layout.text(metrics.margin, section.heading, BOLD, metrics.heading_font_size)
        layout.advance(metrics.heading_font_size * 1.5)
        body: Body = section.body
        if isinstance(body, TableBody):
            _layout_table(layout, body, metrics)
        elif isinstance(body, KeyValueBody):
            _layout_keyvalues(layout, body, metrics)
        else:
            _layout_paragraph(layout, body, metrics)

    footer_left = f"Generated {doc.footer_timestamp} from {doc.source_label}"
    if layout.replaced:
        footer_left += f" ({layout.replaced} unmappable characters replaced)"
    total = len(layout.pages)
    footer_y = metrics.page_height - metrics.margin + 14
    for i, page in enumerate(layout.pages, start=1):
        left, _ = kernels.winansi_encode(footer_left)
        right, _ = kernels.winansi_encode(f"Page {i} of {total}")
        right_w = kernels.text_width(right, FONT_WIDTHS[REGULAR]) * 8.0 / 1000.0
        page.runs.append(_TextRun(metrics.margin, footer_y, REGULAR, 8.0, left))
        page.runs.append(
            _TextRun(metrics.page_width - metrics.margin - right_w, footer_y, REGULAR, 8.0, right)
        )

    return _serialize(layout.pages, metrics, doc)


def _content_stream(page: _Page, metrics: PageMetrics) -> bytes:
    parts = [b"0.5 w"]
    for r in page.rects:
        y = metrics.page_height - r.y_top - r.h
        parts.append(f"{_num(r.x)} {_num(y)} {_num(r.w)} {_num(r.h)} re S".encode("ascii"))
    for run in page.runs:
        baseline = metrics.page_height - run.y_top - run.size
        escaped = kernels.escape_pdf_text(run.data)
        parts.append(
            f"BT /{run.font} {_num(run.size)} Tf {_num(run.x)} {_num(baseline)} Td (".encode("ascii")
            + escaped
            + b") Tj ET"
        )
    return b"\n".join(parts)


def _serialize(pages: list[_Page], metrics: PageMetrics, doc: ReportDocument) -> bytes:
    objects: list[bytes] = []

    def add(body: bytes) -> int:
        objects.append(body)
        return len(objects)

    catalog = add(b"<< /Type /Catalog /Pages 2 0 R >>")
    pages_obj = add(b"")  # backpatched once kid ids are known
    add(b"<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica /Encoding /WinAnsiEncoding >>")
    add(b"<< /Type /Font /Subtype /Type1 /BaseFont /Helvetica-Bold /Encoding /WinAnsiEncoding >>")
    stamp = doc.generated_at.strftime("%Y%m%d%H%M%S")
    info = add(
        f"<< /Producer (fhirlens) /CreationDate (D:{stamp}Z) >>".encode("ascii")
    )

    kid_ids = []
    media = f"[0 0 {_num(metrics.page_width)} {_num(metrics.page_height)}]"
    for page in pages:
        stream = _content_stream(page, metrics)
        content_id = add(
            b"<< /Length %d >>\nstream\n" % len(stream) + stream + b"\nendstream"
        )
        page_id = add(
            (
                f"<< /Type /Page /Parent 2 0 R /MediaBox {media} "
                f"/Resources << /Font << /F1 3 0 R /F2 4 0 R >> >> "
                f"/Contents {content_id} 0 R >>"
            ).encode("ascii")
        )
        kid_ids.append(page_id)

    kids = " ".join(f"{k} 0 R" for k in kid_ids)
    objects[pages_obj - 1] = f"<< /Type /Pages /Kids [{kids}] /Count {len(kid_ids)} >>".encode(
        "ascii"
    )

    header = b"%PDF-1.4\n%\xe2\xe3\xcf\xd3\n"
    chunks = [header]
    offset = len(header)
    offsets = []
    for i, body in enumerate(objects, start=1):
        offsets.append(offset)
        obj = b"%d 0 obj\n" % i + body + b"\nendobj\n"
        chunks.append(obj)
        offset += len(obj)

    xref = [b"xref\n", b"0 %d\n" % (len(objects) + 1), b"0000000000 65535 f \n"]
    xref += [b"%010d 00000 n \n" % off for off in offsets]
    chunks.append(b"".join(xref))
    chunks.append(
        b"trailer\n<< /Size %d /Root %d 0 R /Info %d 0 R >>\nstartxref\n%d\n%%%%EOF"
        % (len(objects) + 1, catalog, info, offset)
    )
    return b"".join(chunks)
