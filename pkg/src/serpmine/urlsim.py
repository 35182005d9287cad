"""Positional URL field decomposition and field-match similarity.

A URL is broken into ``[scheme, host, path segments..., query params...]``
and two URLs are scored by how many leading positions agree, normalised by
their mean field count.  Crawl admission compares every candidate link to
the start URL with :func:`sim_url`.
"""

from __future__ import annotations

from dataclasses import dataclass
from urllib.parse import urlsplit, urlunsplit

__all__ = [
    "UrlFields",
    "canonical_url",
    "parse_url_fields",
    "fsm",
    "sim_url",
    "url_similarity",
]

_DEFAULT_PORTS = {"http": 80, "https": 443}


def _split(url: str):
    if not isinstance(url, str):
        raise ValueError(f"malformed URL: {url!r}")
    try:
        parts = urlsplit(url.strip())
        port = parts.port
    except ValueError as exc:
        raise ValueError(f"malformed URL: {url!r} ({exc})") from None
    if not parts.scheme or not parts.netloc or not parts.hostname:
        raise ValueError(f"malformed URL: {url!r} (not absolute)")
    scheme = parts.scheme.lower()
    host = parts.hostname.lower()
    if port is not None and _DEFAULT_PORTS.get(scheme) != port:
        host = f"{host}:{port}"
    return scheme, host, parts.path, parts.query


def canonical_url(url: str) -> str:
    """Lowercase scheme/host, drop default port and fragment, ``""`` path -> ``/``."""
    scheme, host, path, query = _split(url)
    return urlunsplit((scheme, host, path or "/", query, ""))


@dataclass(frozen=True)
class UrlFields:
    original: str
    fields: tuple[str, ...]

    @property
    def count(self) -> int:
        return len(self.fields)

    def __len__(self) -> int:
        return len(self.fields)


def parse_url_fields(url: str) -> UrlFields:
    """Decompose an absolute URL into its ordered comparison fields.

    >>> parse_url_fields("https://www.bluetooth.org/tpg/listings.cfm").fields
    ('https', 'www.bluetooth.org', 'tpg', 'listings.cfm')
    """
    scheme, host, path, query = _split(url)
    fields = [scheme, host]
    fields.extend(seg for seg in path.split("/") if seg)
    fields.extend(param for param in query.split("&") if param)
    return UrlFields(original=url, fields=tuple(fields))


def fsm(a: str, b: str) -> int:
    return 1 if a == b else 0


def sim_url(h: UrlFields, s: UrlFields) -> float:
    """Matching leading fields over the mean field count, in [0, 1]."""
    matches = sum(fsm(x, y) for x, y in zip(h.fields, s.fields))
    # 2*m / (nh + ns) keeps sim_url(u, u) == 1.0 exactly
    return 2 * matches / (h.count + s.count)


def url_similarity(a: str, b: str) -> float:
    return sim_url(parse_url_fields(a), parse_url_fields(b))
