"""Latency benchmark over the pipeline's four user-visible operations.

Measures parse, PDF render, Excel render, and series extraction (plus
normalize, reported separately) on a fixture bundle, excluding warm-up runs.
Can compare the compiled kernel backend against the pure-Python fallback.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from . import _kernels as kernels
from .corpus import CorpusSpec, generate
from .ingest import load_local
from .normalize import normalize_batch
from .pdfwriter import render_pdf
from .report import EPOCH, build_report
from .series import extract_series
from .xlsx import build_workbook, render_xlsx

TABLE1_LABELS = (
    ("parse", "FHIR JSON Parsing"),
    ("pdf", "PDF Report Generation"),
    ("xlsx", "Excel Export Generation"),
    ("series", "Visualization Rendering"),
)

STRICT_P95_BOUNDS_MS = {"parse": 60.0, "pdf": 180.0, "xlsx": 140.0, "series": 50.0}


@dataclass(frozen=True)
class OpStats:
    mean_ms: float
    p50_ms: float
    p95_ms: float
    iterations: int


@dataclass(frozen=True)
class BenchResult:
    ops: dict[str, OpStats]
    backend: str
    fixture_resources: int


def default_fixture() -> bytes:
    """1 patient + 200 observations, the desk-scale reference workload."""
    bundle, _ = generate(CorpusSpec(seed=7, counts={"Patient": 1, "Observation": 200}))
    return bundle


def _percentile(sorted_ms: list[float], q: float) -> float:
    index = max(0, math.ceil(q * len(sorted_ms)) - 1)
    return sorted_ms[index]


def _measure(fn, iterations: int, warmup: int) -> OpStats:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(iterations):
        started = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - started) * 1000.0)
    ordered = sorted(samples)
    return OpStats(
        mean_ms=sum(samples) / len(samples),
        p50_ms=_percentile(ordered, 0.50),
        p95_ms=_percentile(ordered, 0.95),
        iterations=iterations,
    )


def run_bench(data: bytes, iterations: int = 50, warmup: int = 3) -> BenchResult:
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    batch = load_local(data, "bench.json")
    dataset = normalize_batch(batch)
    doc = build_report(dataset, generated_at=EPOCH)
    workbook = build_workbook(dataset)

    ops = {
        "parse": _measure(lambda: load_local(data, "bench.json"), iterations, warmup),
        "normalize": _measure(lambda: normalize_batch(batch), iterations, warmup),
        "pdf": _measure(lambda: render_pdf(doc), iterations, warmup),
        "xlsx": _measure(lambda: render_xlsx(workbook), iterations, warmup),
        "series": _measure(lambda: extract_series(dataset), iterations, warmup),
    }
    return BenchResult(
        ops=ops, backend=kernels.BACKEND, fixture_resources=len(batch.resources)
    )


def format_table(result: BenchResult) -> str:
    lines = [
        f"kernel backend: {result.backend}   fixture resources: {result.fixture_resources}",
        f"{'Operation':<28}{'Mean (ms)':>12}{'p50 (ms)':>12}{'p95 (ms)':>12}",
    ]
    for op, label in TABLE1_LABELS:
        stats = result.ops[op]
        lines.append(
            f"{label:<28}{stats.mean_ms:>12.2f}{stats.p50_ms:>12.2f}{stats.p95_ms:>12.2f}"
        )
    normalize = result.ops["normalize"]
    lines.append(
        f"(normalize: mean {normalize.mean_ms:.2f} ms, p95 {normalize.p95_ms:.2f} ms, "
        f"{normalize.iterations} iterations)"
    )
    return "\n".join(lines)


def compare_backends(data: bytes, iterations: int = 50) -> dict[str, BenchResult]:
    """Run the benchmark under each available kernel backend."""
    previous = kernels.BACKEND
    results = {}
    try:
        for backend in kernels.available_backends():
            kernels.set_backend(backend)
            results[backend] = run_bench(data, iterations=iterations)
    finally:
        kernels.set_backend(previous)
    return results
