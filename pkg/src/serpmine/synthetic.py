"""Deterministic SERP-style fixture site with planted records.

The generated tree uses the repository layout, so it can be served
directly by :class:`~serpmine.fetch.FixtureFetcher`.  Alongside the pages
it writes ``truth.manifest`` plus ready-to-use ``crawl.conf`` and
``extract.conf`` files.
"""

from __future__ import annotations

import html
import random
import re
from collections import Counter
from dataclasses import dataclass, fields
from pathlib import Path

from .crawler import CrawlConfig
from .evaluation import TruthManifest
from .integrator import AttributeRule, ExtractionConfig, Record, extract_record
from .kvconf import ConfigError, parse_bool, read_kv
from .repository import StoredPage, url_to_local_path
from .urlsim import url_similarity

HOST = "www.qualified.example"
START_URL = f"https://{HOST}/tpg/listings.cfm"
FORM_PARAMS = [("listing", "all")]
DETAIL_URL = f"https://{HOST}/tpg/detail.cfm"
THRESHOLD = 0.25

ATTRIBUTES = ("QDID", "Name", "Model", "Company", "SpecVersion", "ProductType")
KEY_ATTRIBUTES = ("QDID",)

_PREFIXES = ["Blue", "Nano", "Aero", "Wave", "Pulse", "Link", "Sonic", "Tera"]
_NOUNS = ["Core", "Beam", "Sync", "Dock", "Pod", "Mate", "Port", "Tag"]
_PRODUCT_TYPES = ["Headset", "Car Kit", "Mobile Phone", "Mouse", "Keyboard",
                  "Speaker", "Host Controller", "Profile Subsystem"]
_SPEC_VERSIONS = ["1.1", "1.2", "2.0", "2.1", "3.0", "4.0"]


@dataclass(frozen=True)
class SiteSpec:
    seed: int = 42
    result_pages: int = 15
    records_per_page: int = 10
    noise_pages: int = 50
    duplicate_conflict_count: int = 0
    corruption_count: int = 0
    pagination_cycle: bool = False
    spec_version_rate: float = 0.3
    companies: int = 12

    def __post_init__(self):
        counts = [self.result_pages, self.records_per_page, self.noise_pages,
                  self.duplicate_conflict_count, self.corruption_count]
        if min(counts) < 0:
            raise ConfigError("site spec counts must be >= 0")
        if self.result_pages < 1:
            raise ConfigError("result_pages must be >= 1")
        if self.companies < 1:
            raise ConfigError("companies must be >= 1")
        details = self.result_pages * self.records_per_page
        unique = details - self.duplicate_conflict_count
        if self.duplicate_conflict_count > unique:
            raise ConfigError("too many duplicates for the number of detail pages")
        if self.corruption_count > unique - self.duplicate_conflict_count:
            raise ConfigError("too many corruptions for the number of clean records")

    @property
    def detail_pages(self) -> int:
        return self.result_pages * self.records_per_page

    @classmethod
    def from_items(cls, items, **overrides) -> "SiteSpec":
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in items:
            if key not in types:
                raise ConfigError(f"unknown site spec key: {key!r}")
            try:
                if key == "pagination_cycle":
                    kwargs[key] = parse_bool(value)
                elif key == "spec_version_rate":
                    kwargs[key] = float(value)
                else:
                    kwargs[key] = int(value)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, **overrides) -> "SiteSpec":
        return cls.from_items(read_kv(path), **overrides)


def default_extraction_config() -> ExtractionConfig:
    return ExtractionConfig(
        attributes=(
            AttributeRule("QDID", "id:qdid", r"QDID:\s*(\d+)", required=True),
            AttributeRule("Name", "css:h1.product-name", required=True),
            AttributeRule("Model", "label:Model", required=True),
            AttributeRule("Company", "label:Company", required=True),
            AttributeRule("SpecVersion", "label:Spec Version"),
            AttributeRule("ProductType", "label:Product Type"),
        ),
        keywords=("detail.cfm",),
        key_attributes=KEY_ATTRIBUTES,
        table_name="qualified_products",
    )


def default_crawl_config(depth_limit: int = 2, threshold: float = THRESHOLD,
                         max_parallel_fetches: int = 1) -> CrawlConfig:
    return CrawlConfig(start_url=START_URL, form_params=list(FORM_PARAMS),
                       next_page_rule="text:Next", depth_limit=depth_limit,
                       threshold=threshold, max_parallel_fetches=max_parallel_fetches)


def listing_url(page: int) -> str:
    base = default_crawl_config().submission_url
    return base if page == 1 else f"{base}&page={page}"


def noise_url(j: int, rng: random.Random) -> str:
    return f"https://ads-{j}.example/promo/{rng.randint(2005, 2011)}/offer/item-{j}.html"


def _tokens(value: str) -> Counter:
    return Counter(re.findall(r"[^\W_]+", value.lower()))


def _page(title: str, body: str) -> str:
    return ("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
            f"<title>{html.escape(title)}</title>\n</head>\n<body>\n{body}</body>\n</html>\n")


def _detail_html(values: dict[str, str], back: str, related: str | None) -> str:
    e = html.escape
    rows = [f'<tr><th>QDID</th><td id="qdid">QDID: {e(values["QDID"])}</td></tr>',
            f'<tr><th>Name</th><td>{e(values["Name"])}</td></tr>',
            f'<tr><th>Model</th><td class="model">{e(values["Model"])}</td></tr>',
            f'<tr><th>Company</th><td>{e(values["Company"])}</td></tr>']
    if values.get("SpecVersion"):
        rows.append(f'<tr><th>Spec Version</th><td>{e(values["SpecVersion"])}</td></tr>')
    rows.append(f'<tr><th>Product Type</th><td>{e(values["ProductType"])}</td></tr>')
    body = (f'<h1 class="product-name">{e(values["Name"])}</h1>\n'
            f'<p><a href="{e(back)}">Back to listings</a></p>\n'
            '<table class="qualification">\n' + "\n".join(rows) + "\n</table>\n")
    if related:
        body += f'<p>Related listing: <a href="{e(related)}">next product</a></p>\n'
    return _page(f"QDID {values['QDID']} - {values['Name']}", body)


def _listing_html(page: int, total: int, entries, noise, cycle: bool) -> str:
    e = html.escape
    rows = "\n".join(f'<tr><td><a href="{e(url)}">{e(name)}</a></td><td>{e(company)}</td></tr>'
                     for url, name, company in entries)
    body = (f"<h1>Qualified products, page {page} of {total}</h1>\n"
            f'<table class="results">\n{rows}\n</table>\n')
    if noise:
        body += '<div class="sponsored">\n' + "\n".join(
            f'<a href="{e(u)}">Sponsored offer</a>' for u in noise) + "\n</div>\n"
    nav = []
    if page > 1:
        nav.append(f'<a href="{e(listing_url(page - 1))}">Previous</a>')
    if page < total:
        nav.append(f'<a href="{e(listing_url(page + 1))}">Next</a>')
    elif cycle and total > 1:
        nav.append(f'<a href="{e(listing_url(1))}">Next</a>')
    body += '<p class="pager">' + " ".join(nav) + "</p>\n"
    return _page(f"Listings page {page}", body)


def _write(root: Path, url: str, text: str):
    path = root / url_to_local_path(url)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode("utf-8"))


def generate_site(spec: SiteSpec, out_root) -> TruthManifest:
    """Write the fixture tree under ``out_root`` and return its ground truth."""
    root = Path(out_root)
    if root.exists() and any(root.iterdir()):
        raise FileExistsError(f"output directory {root} is not empty")
    root.mkdir(parents=True, exist_ok=True)
    rng = random.Random(spec.seed)

    n_unique = spec.detail_pages - spec.duplicate_conflict_count
    qdids = rng.sample(range(10000, 100000), n_unique)
    planted = []
    for i, qdid in enumerate(qdids):
        values = {
            "QDID": str(qdid),
            "Name": f"{rng.choice(_PREFIXES)}{rng.choice(_NOUNS)} {rng.randint(1, 9)}",
            "Model": f"Model-{rng.randint(100, 999)}-rev{rng.randint(1, 9)}",
            "Company": f"Company-{rng.randint(1, spec.companies)}",
            "SpecVersion": rng.choice(_SPEC_VERSIONS) if rng.random() < spec.spec_version_rate else "",
            "ProductType": rng.choice(_PRODUCT_TYPES),
        }
        planted.append(values)

    pages = [(f"{DETAIL_URL}?qid={v['QDID']}", dict(v)) for v in planted]
    truth_values = [{k: ({v} if v else set()) for k, v in vals.items()} for vals in planted]
    urls = [[url] for url, _ in pages]

    manifest = TruthManifest(ATTRIBUTES, KEY_ATTRIBUTES)
    picks = rng.sample(range(n_unique), spec.duplicate_conflict_count + spec.corruption_count)
    dup_targets, corrupt_targets = (picks[:spec.duplicate_conflict_count],
                                    picks[spec.duplicate_conflict_count:])
    for n, idx in enumerate(dup_targets, 1):
        original = planted[idx]
        if not original["SpecVersion"]:
            original["SpecVersion"] = rng.choice(_SPEC_VERSIONS)
            pages[idx][1]["SpecVersion"] = original["SpecVersion"]
            truth_values[idx]["SpecVersion"] = {original["SpecVersion"]}
        # a token-permuted version ("1.2" vs "2.1") would be cosine-identical
        choices = [v for v in _SPEC_VERSIONS
                   if _tokens(v) != _tokens(original["SpecVersion"])]
        conflict = rng.choice(choices)
        dup_values = dict(original, SpecVersion=conflict)
        dup_url = f"{DETAIL_URL}?qid={original['QDID']}&src=mirror{n}"
        pages.append((dup_url, dup_values))
        truth_values[idx]["SpecVersion"].add(conflict)
        urls[idx].append(dup_url)
        manifest.conflicts.append(((original["QDID"],), "SpecVersion"))
    for idx in corrupt_targets:
        pages[idx][1]["Name"] = pages[idx][1]["Name"] + " Mk0"
        manifest.corrupted.append(((planted[idx]["QDID"],), "Name"))

    for values, page_urls in zip(truth_values, urls):
        manifest.add(Record(values), page_urls)

    order = list(range(len(pages)))
    rng.shuffle(order)
    pages = [pages[i] for i in order]
    noise = [noise_url(j, rng) for j in range(1, spec.noise_pages + 1)]

    start = START_URL
    for url, _ in pages:
        if url_similarity(url, start) < THRESHOLD:
            raise AssertionError(f"relevant URL below threshold: {url}")
    for url in noise:
        if url_similarity(url, start) >= THRESHOLD:
            raise AssertionError(f"noise URL above threshold: {url}")

    per = spec.records_per_page
    for p in range(1, spec.result_pages + 1):
        chunk = pages[(p - 1) * per: p * per]
        back = listing_url(p)
        for j, (url, values) in enumerate(chunk):
            k = (p - 1) * per + j
            related = pages[k + 1][0] if k + 1 < len(pages) else None
            _write(root, url, _detail_html(values, back, related))
        page_noise = noise[p - 1::spec.result_pages]
        entries = [(url, v["Name"], v["Company"]) for url, v in chunk]
        _write(root, listing_url(p),
               _listing_html(p, spec.result_pages, entries, page_noise, spec.pagination_cycle))
    for j, url in enumerate(noise, 1):
        _write(root, url, _page(f"Offer {j}", f"<p>Limited offer number {j}.</p>\n"))

    manifest.write(root / "truth.manifest")
    (root / "crawl.conf").write_text(default_crawl_config().to_text(), encoding="utf-8")
    (root / "extract.conf").write_text(default_extraction_config().to_text(), encoding="utf-8")
    return manifest


@dataclass
class SiteCheck:
    problems: list[str]

    def __bool__(self) -> bool:
        return not self.problems


def verify_site(out_root, manifest: TruthManifest,
                config: ExtractionConfig | None = None) -> SiteCheck:
    """Re-extract every planted record from its detail pages and compare."""
    config = config or default_extraction_config()
    root = Path(out_root)
    problems = []
    for key, record in manifest.records.items():
        seen = {name: set() for name in manifest.attributes}
        for url in manifest.urls.get(key, ()):
            path = root / url_to_local_path(url)
            if not path.is_file():
                problems.append(f"missing detail page {url}")
                continue
            got = extract_record(StoredPage(url, path.read_bytes()), config)
            if got is None:
                problems.append(f"no record extracted from {url}")
                continue
            for name in manifest.attributes:
                seen[name] |= got.values.get(name, set())
        for name in manifest.attributes:
            if seen[name] != record.values.get(name, set()) and any(seen.values()):
                problems.append(f"{'/'.join(key)}: attribute {name} is {sorted(seen[name])}, "
                                f"planted {sorted(record.values.get(name, set()))}")
    return SiteCheck(problems)
