"""Record extraction from mirrored pages and similarity-gated union merge.

Pages reachable from the stored result pages are walked depth-first.  Each
link whose URL or anchor text carries a configured keyword is parsed into a
:class:`Record`; the record is aligned with any stored record sharing its
key attributes, skipped when the two are cosine-identical, and otherwise
merged attribute-by-attribute with set union.
"""

from __future__ import annotations

import configparser
import csv
import fcntl
import io
import logging
import math
import os
import re
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from .kvconf import ConfigError, parse_bool
from .links import collect_links, parse_html
from .repository import Repository, StoredPage
from .urlsim import canonical_url

logger = logging.getLogger(__name__)

VALUE_SEPARATOR = "\x1f"

INSERT, MERGE, SKIP, UNCHANGED = "insert", "merge", "skip", "unchanged"


# -- configuration ---------------------------------------------------------

@dataclass(frozen=True)
class AttributeRule:
    """Where to find one attribute on a page.

    ``locator`` is ``id:<id>``, ``css:<selector>``, or ``label:<text>`` (the
    element following a label cell/term reading ``<text>``).  A bare
    locator is treated as a CSS selector.
    """

    name: str
    locator: str
    capture: str | None = None
    required: bool = False

    def __post_init__(self):
        if not self.locator.strip():
            raise ConfigError(f"attribute {self.name!r}: empty locator")
        if self.capture is not None:
            try:
                groups = re.compile(self.capture).groups
            except re.error as exc:
                raise ConfigError(f"attribute {self.name!r}: bad capture: {exc}") from None
            if groups != 1:
                raise ConfigError(f"attribute {self.name!r}: capture needs exactly one group")


@dataclass(frozen=True)
class ExtractionConfig:
    attributes: tuple[AttributeRule, ...]
    keywords: tuple[str, ...] = ()
    key_attributes: tuple[str, ...] = ()
    table_name: str = "records"

    def __post_init__(self):
        names = self.attribute_names
        if len(set(names)) != len(names):
            raise ConfigError("attribute names must be unique")
        if not self.key_attributes:
            raise ConfigError("at least one key attribute is required")
        unknown = set(self.key_attributes) - set(names)
        if unknown:
            raise ConfigError(f"key attributes not defined: {sorted(unknown)}")

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(rule.name for rule in self.attributes)

    @classmethod
    def from_text(cls, text: str, source: str = "<string>") -> "ExtractionConfig":
        parser = configparser.ConfigParser(allow_no_value=True, interpolation=None,
                                           delimiters=("=",), comment_prefixes=("#",))
        parser.optionxform = str
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
        rules = []
        for section in parser.sections():
            if not section.startswith("attributes."):
                continue
            body = parser[section]
            capture = body.get("capture") or None
            try:
                rules.append(AttributeRule(
                    name=section[len("attributes."):],
                    locator=body.get("locator", ""),
                    capture=capture,
                    required=parse_bool(body.get("required", "false")),
                ))
            except ValueError as exc:
                raise ConfigError(f"{source} [{section}]: {exc}") from None
        if not rules:
            raise ConfigError(f"{source}: no [attributes.<name>] sections")

        def listing(name):
            return tuple(parser[name].keys()) if parser.has_section(name) else ()

        table = parser.get("table", "name", fallback="records")
        return cls(tuple(rules), listing("keywords"), listing("keys"), table)

    @classmethod
    def from_file(cls, path) -> "ExtractionConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        return cls.from_text(text, str(path))

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"[table]\nname = {self.table_name}\n\n[keys]\n")
        out.writelines(f"{k}\n" for k in self.key_attributes)
        out.write("\n[keywords]\n")
        out.writelines(f"{k}\n" for k in self.keywords)
        for rule in self.attributes:
            out.write(f"\n[attributes.{rule.name}]\nlocator = {rule.locator}\n")
            if rule.capture:
                out.write(f"capture = {rule.capture}\n")
            out.write(f"required = {'true' if rule.required else 'false'}\n")
        return out.getvalue()


# -- records -----------------------------------------------------------------

@dataclass
class Record:
    values: dict[str, set[str]]
    source_url: str = ""

    def key(self, key_attributes) -> tuple[str, ...]:
        return tuple(VALUE_SEPARATOR.join(sorted(self.values.get(k, ()))) for k in key_attributes)

    def copy(self) -> "Record":
        return Record({k: set(v) for k, v in self.values.items()}, self.source_url)


def normalize_text(text: str) -> str:
    return " ".join(text.split())


def keyword_gate(url: str, anchor_text: str, keywords) -> bool:
    """True when any keyword is a case-insensitive substring of URL or anchor text."""
    if not keywords:
        return True
    haystack = (url + "\n" + anchor_text).lower()
    return any(k.lower() in haystack for k in keywords)


def _locate(soup, locator: str):
    kind, sep, arg = locator.partition(":")
    if not sep or kind not in {"id", "css", "label"}:
        kind, arg = "css", locator
    arg = arg.strip()
    if kind == "id":
        return soup.find(id=arg)
    if kind == "css":
        return soup.select_one(arg)
    wanted = arg.rstrip(":").strip().lower()
    for tag in soup.find_all(True):
        if tag.find(True) is not None:
            continue
        if normalize_text(tag.get_text(" ")).rstrip(":").strip().lower() != wanted:
            continue
        sibling = tag.find_next_sibling()
        if sibling is not None:
            return sibling
        parent = tag.parent
        if parent is not None:
            rest = normalize_text(parent.get_text(" "))
            label = normalize_text(tag.get_text(" "))
            return rest[len(label):] if rest.startswith(label) else None
    return None


def extract_record(page: StoredPage, config: ExtractionConfig) -> Record | None:
    """Apply every attribute rule to ``page``; None when a required one is missing."""
    try:
        soup = parse_html(page.original_bytes)
    except Exception as exc:
        logger.warning("unparseable page %s: %s", page.url, exc)
        return None
    values: dict[str, set[str]] = {}
    for rule in config.attributes:
        region = _locate(soup, rule.locator)
        text = region if isinstance(region, str) else (
            region.get_text(" ") if region is not None else "")
        text = normalize_text(text)
        if text and rule.capture:
            m = re.search(rule.capture, text)
            text = normalize_text(m.group(1)) if m else ""
        if not text and rule.required:
            return None
        values[rule.name] = {text} if text else set()
    return Record(values, page.url)


def vectorize(record: Record, attribute_order=None) -> Counter:
    """Bag of lowercase alphanumeric tokens over all attribute values."""
    order = attribute_order or list(record.values)
    tokens = Counter()
    for name in order:
        for value in sorted(record.values.get(name, ())):
            tokens.update(re.findall(r"[^\W_]+", value.lower()))
    return tokens


def sim_record(a, b) -> float:
    """Cosine similarity of two non-negative term vectors (dict-like)."""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    dot = math.fsum(w * large.get(t, 0) for t, w in small.items())
    norm_a = math.fsum(w * w for w in a.values())
    norm_b = math.fsum(w * w for w in b.values())
    if norm_a == 0 and norm_b == 0:
        return 1.0
    if norm_a == 0 or norm_b == 0:
        return 0.0
    return min(1.0, dot / math.sqrt(norm_a * norm_b))


# -- store -------------------------------------------------------------------

class RecordStoreError(RuntimeError):
    pass


class RecordStore:
    """Keyed set-valued table persisted as one CSV file.

    Cells hold the sorted values of a set joined by U+001F.  ``commit``
    writes a temporary file and renames it over the original.
    """

    def __init__(self, path, attributes=None, key_attributes=None):
        self.path = Path(path)
        self.attributes: tuple[str, ...] = tuple(attributes or ())
        self.key_attributes: tuple[str, ...] = tuple(key_attributes or ())
        self.rows: dict[tuple[str, ...], Record] = {}
        if self.path.exists():
            self._read()
        elif not self.attributes:
            raise RecordStoreError(f"store {self.path} does not exist")
        if not self.key_attributes:
            self.key_attributes = self.attributes[:1]

    @classmethod
    def for_config(cls, path, config: ExtractionConfig) -> "RecordStore":
        store = cls(path, config.attribute_names, config.key_attributes)
        if store.attributes != config.attribute_names:
            raise RecordStoreError(
                f"store {path} has columns {list(store.attributes)}, "
                f"config expects {list(config.attribute_names)}")
        return store

    def _read(self):
        try:
            with open(self.path, encoding="utf-8", newline="") as fh:
                self.rows = {}
                reader = csv.reader(fh)
                header = next(reader, None)
                if header is None:
                    raise RecordStoreError(f"store {self.path} has no header")
                if self.attributes and tuple(header) != self.attributes:
                    raise RecordStoreError(f"store {self.path}: header {header} does not match")
                self.attributes = tuple(header)
                self.key_attributes = self.key_attributes or self.attributes[:1]
                for row in reader:
                    if len(row) != len(header):
                        raise RecordStoreError(f"store {self.path}: ragged row {row!r}")
                    values = {name: set(cell.split(VALUE_SEPARATOR)) if cell else set()
                              for name, cell in zip(header, row)}
                    self.put(Record(values))
        except OSError as exc:
            raise RecordStoreError(f"cannot read store {self.path}: {exc}") from None

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.records())

    def records(self) -> list[Record]:
        return [self.rows[k] for k in sorted(self.rows)]

    def get(self, key) -> Record | None:
        return self.rows.get(tuple(key))

    def put(self, record: Record):
        self.rows[record.key(self.key_attributes)] = Record(
            {name: set(record.values.get(name, ())) for name in self.attributes})

    def export_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.attributes)
        for record in self.records():
            writer.writerow([VALUE_SEPARATOR.join(sorted(record.values.get(a, ())))
                             for a in self.attributes])
        return out.getvalue()

    def commit(self):
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            tmp = self.path.with_name(self.path.name + ".tmp")
            tmp.write_text(self.export_csv(), encoding="utf-8", newline="")
            os.replace(tmp, self.path)
        except OSError as exc:
            raise RecordStoreError(f"cannot write store {self.path}: {exc}") from None

    @contextmanager
    def writer(self):
        """Hold the advisory single-writer lock for the duration of the block."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path.with_name(self.path.name + ".lock"), "w") as lock:
            fcntl.flock(lock, fcntl.LOCK_EX)
            try:
                yield self
            finally:
                fcntl.flock(lock, fcntl.LOCK_UN)

    def query(self, filters: dict[str, str]) -> list[Record]:
        unknown = set(filters) - set(self.attributes)
        if unknown:
            raise KeyError(sorted(unknown)[0])
        return [r for r in self.records()
                if all(v in r.values.get(a, ()) for a, v in filters.items())]


# -- integration -------------------------------------------------------------

def integrate_record(new: Record, store: RecordStore, config: ExtractionConfig) -> str:
    """Insert, skip, or union-merge ``new`` into ``store``; returns the action."""
    key = new.key(config.key_attributes)
    old = store.get(key)
    if old is None:
        store.put(new)
        return INSERT
    order = config.attribute_names
    if sim_record(vectorize(new, order), vectorize(old, order)) == 1.0:
        return SKIP
    merged = old.copy()
    changed = False
    for name in order:
        incoming = new.values.get(name, set())
        if incoming != old.values.get(name, set()):
            union = old.values.get(name, set()) | incoming
            changed |= union != old.values.get(name, set())
            merged.values[name] = union
    if not changed:
        return UNCHANGED
    store.put(merged)
    return MERGE


@dataclass
class IntegrationReport:
    pages_visited: int = 0
    gated_out: int = 0
    no_record: int = 0
    records_inserted: int = 0
    records_merged: int = 0
    records_skipped: int = 0
    records_unchanged: int = 0
    actions: list[tuple[str, str]] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {k: v for k, v in vars(self).items() if k != "actions"}


class IntegrationError(RuntimeError):
    def __init__(self, message: str, pages_processed: int):
        super().__init__(f"{message} (after {pages_processed} pages)")
        self.pages_processed = pages_processed


_COUNTER = {INSERT: "records_inserted", MERGE: "records_merged",
            SKIP: "records_skipped", UNCHANGED: "records_unchanged"}


def run_wdics(repo: Repository, config: ExtractionConfig, store: RecordStore) -> IntegrationReport:
    """Walk the mirror from its result pages and integrate every gated record."""
    if not repo.finalized:
        raise IntegrationError(f"repository {repo.root} is not finalized", 0)
    report = IntegrationReport()
    results = repo.result_urls()
    visited = set(results)
    gated = set()

    def links_of(url):
        page = repo.stored_page(url)
        return collect_links(page.original_bytes, page.url) if page.is_html else []

    with store.writer():
        for result_url in results:
            # explicit stack: detail pages may chain arbitrarily deep
            stack = [iter(links_of(result_url))]
            while stack:
                link = next(stack[-1], None)
                if link is None:
                    stack.pop()
                    continue
                url = canonical_url(link.url)
                if url in visited or not repo.has_page(url):
                    continue
                if not keyword_gate(link.url, link.text, config.keywords):
                    if url not in gated:
                        gated.add(url)
                        report.gated_out += 1
                    continue
                visited.add(url)
                report.pages_visited += 1
                page = repo.stored_page(url)
                if not page.is_html:
                    continue
                record = extract_record(page, config)
                if record is None:
                    report.no_record += 1
                else:
                    action = integrate_record(record, store, config)
                    setattr(report, _COUNTER[action], getattr(report, _COUNTER[action]) + 1)
                    report.actions.append((url, action))
                stack.append(iter(links_of(url)))
        try:
            store.commit()
        except RecordStoreError as exc:
            raise IntegrationError(str(exc), report.pages_visited) from None
    return report
