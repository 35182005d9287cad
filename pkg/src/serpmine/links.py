"""Anchor and reference extraction from HTML markup."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from html.parser import HTMLParser
from urllib.parse import urldefrag, urljoin

from bs4 import BeautifulSoup

logger = logging.getLogger(__name__)

REFERENCE_ATTRS = ("href", "src")
ASSET_TAGS = {"img": "src", "script": "src", "link": "href", "source": "src"}


@dataclass(frozen=True)
class Link:
    url: str
    text: str = ""


def parse_html(body: bytes | str) -> BeautifulSoup:
    return BeautifulSoup(body, "html.parser")


def _absolute(base_url: str, href: str) -> str | None:
    href = href.strip()
    if not href or href.startswith(("javascript:", "mailto:", "tel:", "data:")):
        return None
    url, _ = urldefrag(urljoin(base_url, href))
    if not url.startswith(("http://", "https://")):
        return None
    return url


def collect_links(body: bytes | str, base_url: str) -> list[Link]:
    """Absolute anchor targets in document order, first occurrence wins."""
    try:
        soup = parse_html(body)
    except Exception as exc:  # html.parser is lenient; anything here is a bad page
        logger.warning("unparseable page %s: %s", base_url, exc)
        return []
    seen = set()
    links = []
    for tag in soup.find_all(["a", "area"], href=True):
        url = _absolute(base_url, tag["href"])
        if url is None or url in seen:
            continue
        seen.add(url)
        links.append(Link(url, " ".join(tag.get_text(" ").split())))
    return links


def collect_assets(body: bytes | str, base_url: str) -> list[str]:
    soup = parse_html(body)
    out = []
    for name, attr in ASSET_TAGS.items():
        for tag in soup.find_all(name):
            if name == "link" and "stylesheet" not in (tag.get("rel") or []):
                continue
            value = tag.get(attr)
            url = _absolute(base_url, value) if value else None
            if url and url not in out:
                out.append(url)
    return out


# -- raw-offset scanning, used where bytes outside attributes must survive ----

_ATTR_RE = re.compile(
    r"""(?P<pre>\s(?P<name>href|src)\s*=\s*)"""
    r"""(?:"(?P<dq>[^"]*)"|'(?P<sq>[^']*)'|(?P<bare>[^\s"'>]+))""",
    re.IGNORECASE,
)


class _TagScanner(HTMLParser):
    def __init__(self, text: str):
        super().__init__(convert_charrefs=True)
        self._line_starts = [0]
        for m in re.finditer("\n", text):
            self._line_starts.append(m.end())
        self.tags: list[tuple[int, str]] = []

    def handle_starttag(self, tag, attrs):
        raw = self.get_starttag_text()
        if raw is None:
            return
        line, col = self.getpos()
        self.tags.append((self._line_starts[line - 1] + col, raw))

    handle_startendtag = handle_starttag


def scan_references(text: str):
    """Yield ``(start, end, value)`` spans of every href/src attribute value.

    ``value`` is the raw (still entity-escaped) attribute text; the span
    covers exactly the value characters, quotes excluded.
    """
    scanner = _TagScanner(text)
    scanner.feed(text)
    scanner.close()
    for offset, raw in scanner.tags:
        for m in _ATTR_RE.finditer(raw):
            group = "dq" if m.group("dq") is not None else "sq" if m.group("sq") is not None else "bare"
            yield offset + m.start(group), offset + m.end(group), m.group(group)
