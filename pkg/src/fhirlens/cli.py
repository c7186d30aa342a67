"""Command-line front door: convert, fetch, bench, serve, corpus."""

from __future__ import annotations

import argparse
import errno
import json
import sys
from pathlib import Path

from . import __version__
from .bench import STRICT_P95_BOUNDS_MS, compare_backends, default_fixture, format_table, run_bench
from .corpus import CorpusSpec, generate
from .errors import FhirlensError
from .exports import export_dataset
from .ingest import FetchOptions, fetch_endpoint, load_local, merged_bundle_json
from .normalize import Dataset, normalize_batch
from .service import create_server, default_port, default_ui_dir


def _report_table(dataset: Dataset) -> str:
    lines = [f"{'Kind':<24}{'Attempted':>10}{'Succeeded':>10}{'Rate':>9}"]
    for kind, stats in dataset.report.per_kind.items():
        rate = dataset.report.success_rate(kind)
        lines.append(f"{kind.name:<24}{stats.attempted:>10}{stats.succeeded:>10}{rate:>8.0%}")
    return "\n".join(lines)


def _convert_dataset(dataset: Dataset, args) -> int:
    body, _, filename = export_dataset(
        dataset, args.format, kind=args.kind, fixed_timestamp=args.fixed_timestamp
    )
    out = Path(args.out) if args.out else Path(filename)
    out.write_bytes(body)
    print(_report_table(dataset))
    print(f"wrote {out} ({len(body)} bytes)")
    return 0 if dataset.report.total_failures == 0 else 2


def cmd_convert(args) -> int:
    try:
        data = Path(args.input).read_bytes()
    except OSError as exc:
        print(f"error: cannot read {args.input}: {exc}", file=sys.stderr)
        return 1
    try:
        dataset = normalize_batch(load_local(data, Path(args.input).name))
        return _convert_dataset(dataset, args)
    except (FhirlensError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def cmd_fetch(args) -> int:
    opts_kwargs = {"max_pages": args.max_pages, "retry_on_connect_failure": args.retry}
    if args.timeout_ms is not None:
        opts_kwargs["timeout_ms"] = args.timeout_ms
    try:
        opts = FetchOptions(**opts_kwargs)
        batch = fetch_endpoint(args.base_url, args.type, args.query, opts)
    except (FhirlensError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"fetched {len(batch.resources)} resources over {batch.fetched_pages} page(s)")

    if args.format:
        try:
            dataset = normalize_batch(batch)
            return _convert_dataset(dataset, args)
        except (FhirlensError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    if not args.out:
        print("error: provide --out for the raw bundle or --format for an export", file=sys.stderr)
        return 1
    Path(args.out).write_text(merged_bundle_json(batch), encoding="utf-8")
    print(f"wrote {args.out}")
    return 0


def cmd_bench(args) -> int:
    if args.iterations < 1:
        print("error: iterations must be >= 1", file=sys.stderr)
        return 1
    try:
        data = Path(args.input).read_bytes() if args.input else default_fixture()
    except OSError as exc:
        print(f"error: cannot read {args.input}: {exc}", file=sys.stderr)
        return 1

    if args.compare_kernels:
        results = compare_backends(data, iterations=args.iterations)
        for backend, result in results.items():
            print(f"--- backend: {backend} ---")
            print(format_table(result))
        return 0

    result = run_bench(data, iterations=args.iterations)
    print(format_table(result))
    over = [
        label
        for op, label in (("parse", "parse"), ("pdf", "pdf"), ("xlsx", "xlsx"), ("series", "series"))
        if result.ops[op].p95_ms > STRICT_P95_BOUNDS_MS[op]
    ]
    bounds = ", ".join(f"{op} {int(v)} ms" for op, v in STRICT_P95_BOUNDS_MS.items())
    print(f"reference p95 bounds: {bounds}")
    if over:
        print(f"note: p95 above reference bound for: {', '.join(over)}")
    return 0


def cmd_serve(args) -> int:
    ui_dir = Path(args.ui_dir) if args.ui_dir else default_ui_dir()
    try:
        server = create_server(host=args.host, port=args.port, ui_dir=ui_dir)
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            print(f"error: port {args.port} is already in use", file=sys.stderr)
        else:
            print(f"error: cannot bind: {exc}", file=sys.stderr)
        return 1
    host, port = server.server_address[:2]
    url = f"http://{host}:{port}"
    print(f"fhirlens service listening on {url}")
    if args.open:
        import webbrowser

        webbrowser.open(url)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        print("shutting down")
    finally:
        server.server_close()
    return 0


def cmd_corpus(args) -> int:
    try:
        raw = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        spec = CorpusSpec.from_json_dict(raw)
    except (OSError, ValueError) as exc:
        print(f"error: cannot load corpus spec: {exc}", file=sys.stderr)
        return 1
    bundle, manifest = generate(spec)
    Path(args.out).write_bytes(bundle)
    print(f"wrote {args.out} ({manifest['total_entries']} entries)")
    if args.manifest:
        Path(args.manifest).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
        print(f"wrote {args.manifest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fhirlens", description=__doc__)
    parser.add_argument("--version", action="version", version=f"fhirlens {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    convert = sub.add_parser("convert", help="transform a FHIR JSON file into a report")
    convert.add_argument("input")
    convert.add_argument("--format", required=True, choices=("pdf", "xlsx", "csv"))
    convert.add_argument("--kind", help="resource kind for csv export")
    convert.add_argument("--out", help="output path (defaults to report.<ext>)")
    convert.add_argument("--fixed-timestamp", action="store_true",
                         help="freeze the report timestamp to epoch 0 for reproducible bytes")
    convert.set_defaults(fn=cmd_convert)

    fetch = sub.add_parser("fetch", help="retrieve resources from a FHIR endpoint")
    fetch.add_argument("--base-url", required=True)
    fetch.add_argument("--type", required=True, help="resource type or Type/id path")
    fetch.add_argument("--query", default="", help="search query string, e.g. _count=20")
    fetch.add_argument("--max-pages", type=int, default=10)
    fetch.add_argument("--timeout-ms", type=int, default=None)
    fetch.add_argument("--retry", action="store_true",
                       help="retry once on connection failure")
    fetch.add_argument("--out", help="save the merged raw bundle here")
    fetch.add_argument("--format", choices=("pdf", "xlsx", "csv"),
                       help="convert the fetched batch instead of saving raw JSON")
    fetch.add_argument("--kind")
    fetch.add_argument("--fixed-timestamp", action="store_true")
    fetch.set_defaults(fn=cmd_fetch)

    bench = sub.add_parser("bench", help="measure pipeline latency")
    bench.add_argument("--input", help="bundle fixture (default: generated 1 patient + 200 observations)")
    bench.add_argument("--iterations", type=int, default=50)
    bench.add_argument("--compare-kernels", action="store_true",
                       help="run under every available kernel backend")
    bench.set_defaults(fn=cmd_bench)

    serve = sub.add_parser("serve", help="run the local HTTP service and UI")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=default_port())
    serve.add_argument("--ui-dir", help="directory of built UI assets")
    serve.add_argument("--open", action="store_true", help="open the UI in a browser")
    serve.set_defaults(fn=cmd_serve)

    corpus = sub.add_parser("corpus", help="generate a synthetic FHIR corpus")
    corpus.add_argument("--spec", required=True, help="corpus spec JSON file")
    corpus.add_argument("--out", required=True, help="bundle output path")
    corpus.add_argument("--manifest", help="write injected-index manifest here")
    corpus.set_defaults(fn=cmd_corpus)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
