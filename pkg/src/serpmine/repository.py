"""On-disk page mirror: URL -> file mapping, manifest, link rewriting.

Layout under ``root``::

    manifest.idx             one tab-separated record per URL
    <host>/<path...>         served copies (links rewritten at finalize)
    originals/<host>/...     pristine fetched bytes

Pages are written with their original bytes during a crawl.  ``finalize``
rewrites every stored HTML page once the full URL set is known, so each
internal link points at a file that actually exists.
"""

from __future__ import annotations

import hashlib
import html
import logging
import os
import posixpath
import re
import threading
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from urllib.parse import unquote, urldefrag, urljoin, urlsplit

from .links import scan_references
from .urlsim import canonical_url

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.idx"
MANIFEST_HEADER = "# serpmine-manifest v1"
FINALIZED_MARK = "# finalized"
ORIGINALS_DIR = "originals"

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")
_EXT = re.compile(r"\.[A-Za-z0-9]{1,8}$")


def _safe(part: str, limit: int = 80) -> str:
    part = _UNSAFE.sub("_", unquote(part))[:limit]
    return "_" if part in {"", ".", ".."} else part


def url_hash8(url: str) -> str:
    return hashlib.sha1(url.encode("utf-8")).hexdigest()[:8]


def is_html_type(media_type: str | None) -> bool:
    if not media_type:
        return True
    media_type = media_type.split(";")[0].strip().lower()
    return media_type in {"text/html", "application/xhtml+xml"}


def url_to_local_path(url: str, html: bool = True) -> str:
    """Map a URL to a relative POSIX path; an 8-hex URL hash keeps it injective.

    >>> url_to_local_path("https://a.example/").startswith("a.example/index-")
    True
    """
    url = canonical_url(url)
    parts = urlsplit(url)
    host = _safe(parts.netloc.replace(":", "_"))
    segments = parts.path.split("/")[1:]
    if not segments or segments[-1] == "":
        dirs, base = [s for s in segments if s], "index"
    else:
        dirs, base = [s for s in segments[:-1] if s], segments[-1]
    base = _safe(base)
    if parts.query:
        base = f"{base}_{_safe(parts.query)}"
    digest = url_hash8(url)
    if html:
        name = f"{base}-{digest}.html"
    else:
        m = _EXT.search(base)
        stem, ext = (base[: m.start()], m.group()) if m else (base, "")
        name = f"{stem or '_'}-{digest}{ext}"
    return posixpath.join(host, *(_safe(d) for d in dirs), name)


@dataclass(frozen=True)
class StoredPage:
    url: str
    original_bytes: bytes
    media_type: str = "text/html"
    rewritten_bytes: bytes | None = None

    @property
    def is_html(self) -> bool:
        return is_html_type(self.media_type)


@dataclass(frozen=True)
class ManifestEntry:
    url: str
    path: str
    depth: int
    sha256: str
    length: int
    status: str = "ok"
    role: str = "page"  # result | page | asset

    def to_line(self) -> str:
        return "\t".join([self.url, self.path, str(self.depth), self.sha256,
                          str(self.length), self.status, self.role])

    @classmethod
    def from_line(cls, line: str) -> "ManifestEntry":
        url, path, depth, digest, length, status, role = line.split("\t")
        return cls(url, path, int(depth), digest, int(length), status, role)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class RepositoryError(RuntimeError):
    pass


def rewrite_links(body: bytes, base_url: str, url_map: dict[str, str], page_path: str) -> bytes:
    """Point every mirrored href/src at its stored copy, relative to ``page_path``.

    Targets missing from ``url_map`` keep their original value. Only
    attribute values change; all other bytes are preserved.
    """
    text = body.decode("utf-8", errors="surrogateescape")
    here = posixpath.dirname(page_path)
    pieces = []
    last = 0
    for start, end, raw in scan_references(text):
        value = html.unescape(raw)
        try:
            target, fragment = urldefrag(urljoin(base_url, value.strip()))
            target = canonical_url(target)
        except ValueError:
            continue
        local = url_map.get(target)
        if local is None:
            continue
        rel = posixpath.relpath(local, here or ".")
        if fragment:
            rel = f"{rel}#{fragment}"
        pieces.append(text[last:start])
        pieces.append(html.escape(rel, quote=True))
        last = end
    if not pieces:
        return body
    pieces.append(text[last:])
    return "".join(pieces).encode("utf-8", errors="surrogateescape")


class Repository:
    """A mirror rooted at ``root``; reopening an existing root resumes it."""

    def __init__(self, root):
        self.root = Path(root)
        self.entries: dict[str, ManifestEntry] = {}
        self.finalized = False
        self._lock = threading.Lock()
        self._load()

    # -- manifest ---------------------------------------------------------

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def _load(self):
        if not self.manifest_path.exists():
            return
        lines = self.manifest_path.read_text(encoding="utf-8").splitlines()
        for line in lines:
            if not line or line.startswith("#"):
                continue
            entry = ManifestEntry.from_line(line)
            self.entries[entry.url] = entry
        tail = [ln for ln in lines if ln.strip()]
        self.finalized = bool(tail) and tail[-1] == FINALIZED_MARK

    def _append(self, entry: ManifestEntry):
        self.root.mkdir(parents=True, exist_ok=True)
        new = not self.manifest_path.exists()
        with open(self.manifest_path, "a", encoding="utf-8") as fh:
            if new:
                fh.write(MANIFEST_HEADER + "\n")
            fh.write(entry.to_line() + "\n")
        self.finalized = False

    def _write_manifest(self, finalized: bool):
        self.root.mkdir(parents=True, exist_ok=True)
        lines = [MANIFEST_HEADER] + [e.to_line() for e in self.entries.values()]
        if finalized:
            lines.append(FINALIZED_MARK)
        tmp = self.manifest_path.with_suffix(".tmp")
        tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
        os.replace(tmp, self.manifest_path)
        self.finalized = finalized

    # -- lookup -----------------------------------------------------------

    def get(self, url: str) -> ManifestEntry | None:
        return self.entries.get(canonical_url(url))

    def has_page(self, url: str) -> bool:
        entry = self.get(url)
        return entry is not None and entry.ok

    def url_map(self) -> dict[str, str]:
        return {u: e.path for u, e in self.entries.items() if e.ok}

    def result_urls(self) -> list[str]:
        return [u for u, e in self.entries.items() if e.ok and e.role == "result"]

    @property
    def start_url(self) -> str | None:
        results = self.result_urls()
        return results[0] if results else None

    def original_bytes(self, url: str) -> bytes:
        entry = self.get(url)
        if entry is None or not entry.ok:
            raise KeyError(url)
        return (self.root / ORIGINALS_DIR / entry.path).read_bytes()

    def stored_page(self, url: str) -> StoredPage:
        entry = self.get(url)
        body = self.original_bytes(url)
        media = "text/html" if entry.path.endswith(".html") else "application/octet-stream"
        return StoredPage(entry.url, body, media)

    # -- writes -----------------------------------------------------------

    def save_page(self, page: StoredPage, depth: int, role: str = "page") -> ManifestEntry:
        url = canonical_url(page.url)
        path = url_to_local_path(url, html=page.is_html)
        body = page.original_bytes
        digest = hashlib.sha256(body).hexdigest()
        with self._lock:
            old = self.entries.get(url)
            if old is not None and old.ok and old.path == path:
                original = self.root / ORIGINALS_DIR / path
                if original.exists() and hashlib.sha256(original.read_bytes()).hexdigest() == digest:
                    if role == "result" and old.role != "result":
                        old = replace(old, role=role)
                        self.entries[url] = old
                        self._append(old)
                    return old
            for target in (self.root / ORIGINALS_DIR / path, self.root / path):
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_bytes(body)
            entry = ManifestEntry(url, path, depth, digest, len(body), "ok", role)
            self.entries[url] = entry
            self._append(entry)
            return entry

    def record_error(self, url: str, depth: int, reason: str) -> ManifestEntry:
        url = canonical_url(url)
        status = "error:" + re.sub(r"\s+", " ", reason)[:120]
        entry = ManifestEntry(url, "-", depth, "-", 0, status, "page")
        with self._lock:
            old = self.entries.get(url)
            if old is not None and old.ok:
                return old
            self.entries[url] = entry
            self._append(entry)
        return entry

    def finalize(self) -> int:
        """Rewrite links in every stored HTML page and compact the manifest."""
        url_map = self.url_map()
        rewritten = 0
        for url, entry in list(self.entries.items()):
            if not entry.ok:
                continue
            body = (self.root / ORIGINALS_DIR / entry.path).read_bytes()
            if entry.path.endswith(".html"):
                body = rewrite_links(body, url, url_map, entry.path)
                rewritten += 1
            target = self.root / entry.path
            if not target.exists() or target.read_bytes() != body:
                target.write_bytes(body)
            self.entries[url] = replace(entry, sha256=hashlib.sha256(body).hexdigest(),
                                        length=len(body))
        self._write_manifest(finalized=True)
        return rewritten

    # -- verification -----------------------------------------------------

    def verify(self) -> list[str]:
        """Problems with manifest/file agreement (empty when consistent)."""
        problems = []
        seen_paths = {}
        for url, entry in self.entries.items():
            if not entry.ok:
                continue
            if entry.path in seen_paths:
                problems.append(f"path collision: {url} and {seen_paths[entry.path]}")
            seen_paths[entry.path] = url
            target = self.root / entry.path
            if not target.exists():
                problems.append(f"missing file for {url}: {entry.path}")
            elif hashlib.sha256(target.read_bytes()).hexdigest() != entry.sha256:
                problems.append(f"hash mismatch for {url}: {entry.path}")
        return problems

    def offline_walk(self, start_url: str | None = None):
        """Follow relative links from the stored start page using files only.

        Returns ``(reached_paths, dangling)`` where ``dangling`` lists
        ``(from_path, href)`` pairs whose relative target does not exist.
        """
        start_url = start_url or self.start_url
        if start_url is None:
            raise RepositoryError("repository has no start page")
        start = self.get(start_url).path
        reached = {start}
        dangling = []
        queue = deque([start])
        while queue:
            current = queue.popleft()
            text = (self.root / current).read_bytes().decode("utf-8", errors="surrogateescape")
            for _, _, raw in scan_references(text):
                value = html.unescape(raw).strip()
                if not value or urlsplit(value).scheme or value.startswith("//"):
                    continue
                rel = urldefrag(value)[0].split("?")[0]
                if not rel:
                    continue
                target = posixpath.normpath(posixpath.join(posixpath.dirname(current), unquote(rel)))
                if target.startswith("..") or not (self.root / target).is_file():
                    dangling.append((current, value))
                    continue
                if target not in reached:
                    reached.add(target)
                    if target.endswith(".html"):
                        queue.append(target)
        return reached, dangling
