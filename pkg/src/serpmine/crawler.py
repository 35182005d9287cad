"""Threshold-gated focused crawl of a paginated result listing.

The crawl submits the start page with the configured form parameters,
follows pagination to collect the result pages, then walks the hyperlinks
of each result page depth-first.  A link is fetched only when its URL
similarity to the start URL reaches the threshold.
"""

from __future__ import annotations

import json
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from urllib.parse import urlencode, urlsplit, urlunsplit

from .fetch import FetchError, Fetcher, Response
from .kvconf import ConfigError, format_kv, parse_bool, read_kv
from .links import Link, collect_assets, collect_links
from .repository import Repository, StoredPage
from .urlsim import canonical_url, parse_url_fields, sim_url

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.25


class CrawlError(RuntimeError):
    """The crawl cannot proceed (e.g. the start page is unreachable)."""


@dataclass
class CrawlConfig:
    start_url: str
    form_params: list[tuple[str, str]] = field(default_factory=list)
    next_page_rule: str = ""
    depth_limit: int = 1
    threshold: float = DEFAULT_THRESHOLD
    max_parallel_fetches: int = 1
    politeness_delay: float = 0.0
    mirror_assets: bool = False

    def __post_init__(self):
        try:
            parse_url_fields(self.start_url)
        except ValueError as exc:
            raise ConfigError(f"start_url: {exc}") from None
        if not 0 <= self.threshold <= 1:
            raise ConfigError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.depth_limit < 0:
            raise ConfigError(f"depth_limit must be >= 0, got {self.depth_limit}")
        if self.max_parallel_fetches < 1:
            raise ConfigError("max_parallel_fetches must be >= 1")
        if self.politeness_delay < 0:
            raise ConfigError("politeness_delay must be >= 0")
        _PageRule.parse(self.next_page_rule)

    @classmethod
    def from_items(cls, items) -> "CrawlConfig":
        kwargs: dict = {"form_params": []}
        try:
            for key, value in items:
                if key.startswith("form_param."):
                    kwargs["form_params"].append((key[len("form_param."):], value))
                elif key in {"start_url", "next_page_rule"}:
                    kwargs[key] = value
                elif key in {"depth_limit", "max_parallel_fetches"}:
                    kwargs[key] = int(value)
                elif key == "threshold":
                    kwargs[key] = float(value)
                elif key == "politeness_delay_ms":
                    kwargs["politeness_delay"] = float(value) / 1000.0
                elif key == "mirror_assets":
                    kwargs[key] = parse_bool(value)
                else:
                    raise ConfigError(f"unknown crawl config key: {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value in crawl config: {exc}") from None
        if "start_url" not in kwargs:
            raise ConfigError("crawl config is missing start_url")
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "CrawlConfig":
        return cls.from_items(read_kv(path))

    def to_text(self) -> str:
        items = [("start_url", self.start_url)]
        items += [(f"form_param.{k}", v) for k, v in self.form_params]
        items += [
            ("next_page_rule", self.next_page_rule),
            ("depth_limit", str(self.depth_limit)),
            ("threshold", repr(self.threshold)),
            ("max_parallel_fetches", str(self.max_parallel_fetches)),
            ("politeness_delay_ms", str(round(self.politeness_delay * 1000))),
            ("mirror_assets", "true" if self.mirror_assets else "false"),
        ]
        return format_kv(items)

    @property
    def submission_url(self) -> str:
        if not self.form_params:
            return self.start_url
        parts = urlsplit(self.start_url)
        query = "&".join(q for q in (parts.query, urlencode(self.form_params)) if q)
        return urlunsplit((parts.scheme, parts.netloc, parts.path, query, ""))


@dataclass(frozen=True)
class _PageRule:
    kind: str
    pattern: str

    @classmethod
    def parse(cls, rule: str) -> "_PageRule":
        rule = rule.strip()
        if not rule:
            return cls("none", "")
        kind, sep, pattern = rule.partition(":")
        if not sep or kind not in {"text", "url"}:
            kind, pattern = "text", rule
        if kind == "url":
            try:
                re.compile(pattern)
            except re.error as exc:
                raise ConfigError(f"next_page_rule: bad regex {pattern!r}: {exc}") from None
        return cls(kind, pattern.strip())

    def matches(self, link: Link) -> bool:
        if self.kind == "text":
            return link.text.strip().lower() == self.pattern.lower()
        if self.kind == "url":
            return re.search(self.pattern, link.url) is not None
        return False


@dataclass
class ResultPageSet:
    pages: list[Response] = field(default_factory=list)
    cycle_detected: bool = False

    @property
    def urls(self) -> list[str]:
        return [p.url for p in self.pages]

    def __len__(self):
        return len(self.pages)


@dataclass
class HyperlinkSet:
    per_page: list[tuple[str, list[Link]]] = field(default_factory=list)

    def links_for(self, url: str) -> list[Link]:
        for source, links in self.per_page:
            if source == url:
                return links
        raise KeyError(url)


@dataclass(frozen=True)
class CrawlFrame:
    urls: tuple[str, ...]
    current_level: int
    local_path: str = ""


@dataclass
class CrawlReport:
    start_url: str = ""
    repository_root: str = ""
    result_pages: int = 0
    pages_stored: int = 0
    assets_stored: int = 0
    skipped_threshold: int = 0
    skipped_visited: int = 0
    fetch_errors: int = 0
    max_depth_reached: int = 0
    network_fetches: int = 0
    pagination_cycle: bool = False
    elapsed_ms: int = 0

    def to_json(self) -> str:
        return json.dumps({f.name: getattr(self, f.name) for f in fields(self)}, indent=2) + "\n"


class RepositoryCache:
    """Fetcher wrapper that serves already-mirrored URLs from the repository."""

    def __init__(self, fetcher: Fetcher, repo: Repository):
        self.fetcher = fetcher
        self.repo = repo
        self.network_fetches = 0
        self._lock = threading.Lock()

    def fetch(self, url: str) -> Response:
        entry = self.repo.get(url)
        if entry is not None and entry.ok:
            page = self.repo.stored_page(url)
            return Response(url, page.original_bytes, page.media_type)
        with self._lock:
            self.network_fetches += 1
        return self.fetcher.fetch(url)


def navigate(config: CrawlConfig, fetcher: Fetcher) -> ResultPageSet:
    """Submit the start page and follow pagination links until exhausted."""
    rule = _PageRule.parse(config.next_page_rule)
    url = config.submission_url
    try:
        first = fetcher.fetch(url)
    except FetchError as exc:
        raise CrawlError(f"start page unreachable: {exc}") from None
    result = ResultPageSet([first])
    seen = {canonical_url(url)}
    page = first
    while rule.kind != "none":
        nxt = next((ln for ln in collect_links(page.body, page.url) if rule.matches(ln)), None)
        if nxt is None:
            break
        key = canonical_url(nxt.url)
        if key in seen:
            logger.warning("pagination cycle at %s -> %s; stopping", page.url, nxt.url)
            result.cycle_detected = True
            break
        seen.add(key)
        try:
            page = fetcher.fetch(nxt.url)
        except FetchError as exc:
            logger.warning("pagination stopped, %s", exc)
            break
        result.pages.append(page)
    return result


def hypcollection(w: ResultPageSet) -> HyperlinkSet:
    return HyperlinkSet([(p.url, collect_links(p.body, p.url)) for p in w.pages])


class _Crawl:
    def __init__(self, config: CrawlConfig, fetcher: Fetcher, repo: Repository,
                 report: CrawlReport):
        self.config = config
        self.fetcher = fetcher
        self.repo = repo
        self.report = report
        self.start = parse_url_fields(config.start_url)
        self.visited: set[str] = set()
        self._lock = threading.Lock()
        self._pool = (ThreadPoolExecutor(config.max_parallel_fetches)
                      if config.max_parallel_fetches > 1 else None)

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    def count(self, name: str, n: int = 1):
        with self._lock:
            setattr(self.report, name, getattr(self.report, name) + n)

    def claim(self, url: str) -> bool:
        """Atomically mark ``url`` visited; False when someone got there first."""
        key = canonical_url(url)
        with self._lock:
            if key in self.visited:
                return False
            self.visited.add(key)
            return True

    def admit(self, url: str) -> bool:
        try:
            score = sim_url(parse_url_fields(url), self.start)
        except ValueError:
            score = 0.0
        if score < self.config.threshold:
            self.count("skipped_threshold")
            return False
        if not self.claim(url):
            self.count("skipped_visited")
            return False
        return True

    def _fetch(self, url: str):
        try:
            return self.fetcher.fetch(url)
        except FetchError as exc:
            return exc

    def webextract(self, frame: CrawlFrame):
        admitted = [u for u in frame.urls if self.admit(u)]
        if self._pool is None:
            fetched = (self._fetch(u) for u in admitted)
        else:
            fetched = self._pool.map(self._fetch, admitted)
        for url, resp in zip(admitted, fetched):
            if isinstance(resp, FetchError):
                logger.warning("fetch failed: %s", resp)
                self.count("fetch_errors")
                self.repo.record_error(url, frame.current_level, resp.reason)
                continue
            page = StoredPage(url, resp.body, resp.media_type)
            try:
                entry = self.repo.save_page(page, frame.current_level)
            except OSError as exc:
                logger.warning("cannot store %s: %s", url, exc)
                self.count("fetch_errors")
                continue
            self.count("pages_stored")
            with self._lock:
                self.report.max_depth_reached = max(self.report.max_depth_reached,
                                                    frame.current_level)
            if not page.is_html:
                continue
            if self.config.mirror_assets:
                self.mirror_assets(page, frame.current_level)
            if frame.current_level < self.config.depth_limit:
                children = tuple(ln.url for ln in collect_links(resp.body, url))
                self.webextract(CrawlFrame(children, frame.current_level + 1, entry.path))

    def mirror_assets(self, page: StoredPage, depth: int):
        for url in collect_assets(page.original_bytes, page.url):
            if not self.claim(url):
                continue
            resp = self._fetch(url)
            if isinstance(resp, FetchError):
                self.count("fetch_errors")
                self.repo.record_error(url, depth, resp.reason)
                continue
            asset = StoredPage(url, resp.body, resp.media_type)
            self.repo.save_page(asset, depth, role="asset")
            self.count("assets_stored")


def webextract(frame: CrawlFrame, config: CrawlConfig, fetcher: Fetcher,
               repo: Repository, report: CrawlReport | None = None,
               visited=()) -> CrawlReport:
    """Fetch and store every admitted URL in ``frame``, recursing depth-first.

    URLs in ``visited`` count as already fetched.
    """
    report = report or CrawlReport(start_url=config.start_url, repository_root=str(repo.root))
    crawl = _Crawl(config, fetcher, repo, report)
    for url in visited:
        crawl.claim(url)
    try:
        crawl.webextract(frame)
    finally:
        crawl.close()
    return report


def run_wdes(config: CrawlConfig, fetcher: Fetcher, repo: Repository) -> CrawlReport:
    """Mirror the result pages and everything above threshold within depth.

    Already-mirrored URLs are read back from ``repo`` instead of refetched,
    so rerunning over the same repository performs no network fetches.
    The repository still needs ``repo.finalize()`` for offline browsing.
    """
    t0 = time.perf_counter()
    report = CrawlReport(start_url=config.start_url, repository_root=str(repo.root))
    cached = RepositoryCache(fetcher, repo)
    w = navigate(config, cached)
    report.pagination_cycle = w.cycle_detected
    hw = hypcollection(w)
    crawl = _Crawl(config, cached, repo, report)
    try:
        for page in w.pages:
            crawl.claim(page.url)
        for page, (source, links) in zip(w.pages, hw.per_page):
            entry = repo.save_page(StoredPage(page.url, page.body, page.media_type), 0,
                                   role="result")
            report.result_pages += 1
            report.pages_stored += 1
            crawl.webextract(CrawlFrame(tuple(ln.url for ln in links), 0, entry.path))
    finally:
        crawl.close()
    report.network_fetches = cached.network_fetches
    report.elapsed_ms = round((time.perf_counter() - t0) * 1000)
    return report


__all__ = [
    "CrawlConfig", "CrawlError", "CrawlFrame", "CrawlReport", "HyperlinkSet",
    "RepositoryCache", "ResultPageSet", "hypcollection", "navigate", "run_wdes",
    "webextract",
]
