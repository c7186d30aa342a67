"""Text-transform kernels with a compiled fast path.

The compiled extension is preferred when importable; the pure-Python fallback
keeps the package fully functional without a C toolchain. Set
``FHIRLENS_PURE_PYTHON=1`` to force the fallback. Callers go through the
module attributes (``kernels.xml_escape`` etc.) so the benchmark can swap
backends at runtime via :func:`set_backend`.
"""

from __future__ import annotations

import os

from . import _pykernels

try:
    if os.environ.get("FHIRLENS_PURE_PYTHON"):
        _ckernels = None
    else:
        from . import _ckernels  # type: ignore[attr-defined]
except ImportError:
    _ckernels = None

_active = _ckernels if _ckernels is not None else _pykernels

BACKEND: str = _active.BACKEND
winansi_encode = _active.winansi_encode
escape_pdf_text = _active.escape_pdf_text
text_width = _active.text_width
xml_escape = _active.xml_escape


def available_backends() -> tuple[str, ...]:
    return ("python", "c") if _ckernels is not None else ("python",)


def set_backend(name: str) -> str:
    """Switch the active kernel backend ('c' or 'python'); returns the name."""
    global BACKEND, winansi_encode, escape_pdf_text, text_width, xml_escape
    if name == "c":
        if _ckernels is None:
            raise ValueError("compiled kernels are not available")
        module = _ckernels
    elif name == "python":
        module = _pykernels
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    BACKEND = module.BACKEND
    winansi_encode = module.winansi_encode
    escape_pdf_text = module.escape_pdf_text
    text_width = module.text_width
    xml_escape = module.xml_escape
    return BACKEND
