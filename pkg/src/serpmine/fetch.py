"""Page fetchers: a directory-backed fixture and a live HTTP client."""

from __future__ import annotations

import mimetypes
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .repository import url_to_local_path


class FetchError(Exception):
    def __init__(self, url: str, reason: str):
        super().__init__(f"{url}: {reason}")
        self.url = url
        self.reason = reason


@dataclass(frozen=True)
class Response:
    url: str
    body: bytes
    media_type: str


class Fetcher(Protocol):
    def fetch(self, url: str) -> Response: ...


class FixtureFetcher:
    """Serve URLs from a tree laid out like a repository (``<root>/<host>/...``)."""

    def __init__(self, root):
        self.root = Path(root)
        self.calls = 0
        self._lock = threading.Lock()

    def fetch(self, url: str) -> Response:
        with self._lock:
            self.calls += 1
        for as_html in (True, False):
            path = self.root / url_to_local_path(url, html=as_html)
            if path.is_file():
                media = "text/html" if as_html else (mimetypes.guess_type(path.name)[0]
                                                      or "application/octet-stream")
                return Response(url, path.read_bytes(), media)
        raise FetchError(url, "not in fixture")


class _LimitedRedirects(urllib.request.HTTPRedirectHandler):
    max_redirections = 5


class HttpFetcher:
    """urllib-based fetcher with a fixed delay between consecutive requests."""

    def __init__(self, politeness_delay: float = 0.0, timeout: float = 30.0,
                 user_agent: str = "serpmine/0.1"):
        self.politeness_delay = politeness_delay
        self.timeout = timeout
        self.user_agent = user_agent
        self.calls = 0
        self._opener = urllib.request.build_opener(_LimitedRedirects())
        self._lock = threading.Lock()
        self._last = 0.0

    def _wait_turn(self):
        with self._lock:
            wait = self._last + self.politeness_delay - time.monotonic()
            if wait > 0:
                time.sleep(wait)
            self._last = time.monotonic()
            self.calls += 1

    def fetch(self, url: str) -> Response:
        self._wait_turn()
        request = urllib.request.Request(url, headers={"User-Agent": self.user_agent})
        try:
            with self._opener.open(request, timeout=self.timeout) as resp:
                body = resp.read()
                media = resp.headers.get_content_type() or "application/octet-stream"
        except urllib.error.HTTPError as exc:
            raise FetchError(url, f"HTTP {exc.code}") from None
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise FetchError(url, str(getattr(exc, "reason", exc))) from None
        return Response(url, body, media)
