"""Similarity-gated SERP mirroring and cosine-similarity record integration."""

from .crawler import (CrawlConfig, CrawlError, CrawlFrame, CrawlReport, hypcollection,
                      navigate, run_wdes, webextract)
from .evaluation import (TABLE4, EvalCounts, EvalReport, TruthManifest, emit_table,
                         precision, recall, score_run, table4_report)
from .fetch import FetchError, FixtureFetcher, HttpFetcher
from .integrator import (AttributeRule, ExtractionConfig, Record, RecordStore,
                         extract_record, integrate_record, keyword_gate, run_wdics,
                         sim_record, vectorize)
from .repository import Repository, StoredPage, rewrite_links, url_to_local_path
from .synthetic import SiteSpec, generate_site, verify_site
from .urlsim import UrlFields, canonical_url, fsm, parse_url_fields, sim_url

__version__ = "0.1.0"

__all__ = [
    "AttributeRule", "CrawlConfig", "CrawlError", "CrawlFrame", "CrawlReport",
    "EvalCounts", "EvalReport", "ExtractionConfig", "FetchError", "FixtureFetcher",
    "HttpFetcher", "Record", "RecordStore", "Repository", "SiteSpec", "StoredPage",
    "TABLE4", "TruthManifest", "UrlFields", "canonical_url", "emit_table",
    "extract_record", "fsm", "generate_site", "hypcollection", "integrate_record",
    "keyword_gate", "navigate", "parse_url_fields", "precision", "recall",
    "rewrite_links", "run_wdes", "run_wdics", "score_run", "sim_record", "sim_url",
    "table4_report", "url_to_local_path", "vectorize", "verify_site", "webextract",
]
