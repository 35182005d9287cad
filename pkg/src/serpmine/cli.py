"""Command-line front end: gen-site, crawl, integrate, query, eval, report.

Exit status: 0 ok, 2 bad config or arguments, 3 fatal crawl error,
4 repository not finalized, 5 malformed or missing truth manifest.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from .crawler import CrawlConfig, CrawlError, run_wdes
from .evaluation import TruthError, emit_table, score_run, table4_report
from .fetch import FixtureFetcher, HttpFetcher
from .integrator import (VALUE_SEPARATOR, ExtractionConfig, IntegrationError, RecordStore,
                         RecordStoreError, run_wdics)
from .kvconf import ConfigError
from .repository import Repository
from .synthetic import SiteSpec, generate_site

log = logging.getLogger("serpmine")

EXIT_CONFIG, EXIT_CRAWL, EXIT_REPO, EXIT_TRUTH = 2, 3, 4, 5


def _fail(status: int, message: str) -> int:
    print(f"serpmine: error: {message}", file=sys.stderr)
    return status


def _render(header, rows, fmt: str) -> str:
    if fmt == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return out.getvalue()
    table = [list(header)] + [list(r) for r in rows]
    widths = [max(len(str(r[i])) for r in table) for i in range(len(header))]
    return "".join("  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip() + "\n"
                   for r in table)


def cmd_gen_site(args) -> int:
    try:
        overrides = dict(seed=args.seed, result_pages=args.pages,
                         records_per_page=args.per_page, noise_pages=args.noise,
                         duplicate_conflict_count=args.duplicates,
                         corruption_count=args.corrupt)
        if args.config:
            spec = SiteSpec.from_file(args.config, **overrides)
        else:
            spec = SiteSpec.from_items([], **overrides)
        manifest = generate_site(spec, args.out)
    except (ConfigError, FileExistsError) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    print(f"generated {spec.result_pages} listing pages, {spec.detail_pages} detail pages, "
          f"{spec.noise_pages} noise pages; {len(manifest.records)} planted records in {args.out}")
    return 0


def cmd_crawl(args) -> int:
    try:
        config = CrawlConfig.from_file(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    if args.mode == "live":
        fetcher = HttpFetcher(politeness_delay=config.politeness_delay)
    else:
        fetcher = FixtureFetcher(args.fixture or Path(args.config).parent)
    repo = Repository(args.repo)
    try:
        report = run_wdes(config, fetcher, repo)
    except CrawlError as exc:
        return _fail(EXIT_CRAWL, str(exc))
    repo.finalize()
    out = Path(args.out) if args.out else Path(args.repo) / "crawl_report.json"
    out.write_text(report.to_json(), encoding="utf-8")
    print(f"stored {report.pages_stored} pages ({report.result_pages} result pages), "
          f"skipped {report.skipped_threshold} below threshold, "
          f"{report.skipped_visited} already visited, {report.fetch_errors} errors; "
          f"report: {out}")
    return 0


def cmd_integrate(args) -> int:
    try:
        config = ExtractionConfig.from_file(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    repo = Repository(args.repo)
    if not repo.manifest_path.exists():
        return _fail(EXIT_REPO, f"no repository manifest at {repo.manifest_path}")
    if not repo.finalized:
        return _fail(EXIT_REPO, f"repository {args.repo} is not finalized; rerun crawl")
    try:
        store = RecordStore.for_config(args.store, config)
        report = run_wdics(repo, config, store)
    except RecordStoreError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except IntegrationError as exc:
        return _fail(1, str(exc))
    summary = report.summary()
    if args.out:
        Path(args.out).write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(f"inserted {report.records_inserted}, merged {report.records_merged}, "
          f"skipped {report.records_skipped}, unchanged {report.records_unchanged} "
          f"({report.pages_visited} pages visited, {report.gated_out} gated out)")
    return 0


def cmd_query(args) -> int:
    filters = {}
    for item in args.filters:
        name, sep, value = item.partition("=")
        if not sep:
            return _fail(EXIT_CONFIG, f"filter must be attribute=value, got {item!r}")
        filters[name] = value
    try:
        store = RecordStore(args.store)
        rows = store.query(filters)
    except RecordStoreError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except KeyError as exc:
        return _fail(EXIT_CONFIG, f"unknown attribute {exc.args[0]!r}")
    sep = VALUE_SEPARATOR if args.format == "csv" else " | "
    body = [[sep.join(sorted(r.values.get(a, ()))) for a in store.attributes] for r in rows]
    sys.stdout.write(_render(store.attributes, body, args.format))
    return 0


def cmd_eval(args) -> int:
    from .evaluation import TruthManifest

    try:
        truth = TruthManifest.read(args.truth)
    except TruthError as exc:
        return _fail(EXIT_TRUTH, str(exc))
    try:
        export = Path(args.store).read_text(encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_CONFIG, f"cannot read store {args.store}: {exc.strerror}")
    table = emit_table(score_run(export, truth, system=args.system))
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    sys.stdout.write(table if args.format == "csv" else _as_text(table))
    return 0


def _as_text(table_csv: str) -> str:
    rows = list(csv.reader(io.StringIO(table_csv)))
    return _render(rows[0], rows[1:], "text") if rows else ""


def cmd_report(args) -> int:
    if args.input:
        try:
            table = Path(args.input).read_text(encoding="utf-8")
        except OSError as exc:
            return _fail(EXIT_CONFIG, f"cannot read {args.input}: {exc.strerror}")
    else:
        table = emit_table(table4_report())
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    sys.stdout.write(table if args.format == "csv" else _as_text(table))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="serpmine", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-site", help="generate a synthetic fixture site")
    p.add_argument("--config", help="site spec (key = value)")
    p.add_argument("--seed", type=int)
    p.add_argument("--pages", type=int, help="number of result pages")
    p.add_argument("--per-page", type=int, help="records per result page")
    p.add_argument("--noise", type=int, help="number of foreign noise pages")
    p.add_argument("--duplicates", type=int, help="conflicting duplicate detail pages")
    p.add_argument("--corrupt", type=int, help="records whose Name is corrupted on the page")
    p.add_argument("--out", required=True, help="output directory (must be empty)")
    p.set_defaults(func=cmd_gen_site)

    p = sub.add_parser("crawl", help="mirror result pages and relevant links")
    p.add_argument("--config", required=True)
    p.add_argument("--repo", required=True)
    p.add_argument("--mode", choices=("fixture", "live"), default="fixture")
    p.add_argument("--fixture", help="fixture root (default: the config file's directory)")
    p.add_argument("--out", help="crawl report path (default: <repo>/crawl_report.json)")
    p.set_defaults(func=cmd_crawl)

    p = sub.add_parser("integrate", help="extract and merge records from a mirror")
    p.add_argument("--config", required=True)
    p.add_argument("--repo", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--out", help="write the integration summary as JSON")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("query", help="print store rows matching attribute=value filters")
    p.add_argument("--store", required=True)
    p.add_argument("--format", choices=("csv", "text"), default="text")
    p.add_argument("filters", nargs="*", metavar="ATTR=VALUE")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", help="score a store against a truth manifest")
    p.add_argument("--store", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out")
    p.add_argument("--system", default="WDICS")
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="print an evaluation table (default: published counts)")
    p.add_argument("--in", dest="input", help="eval CSV to render")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "text"), default="text")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", level=level)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
