"""Page loading and clickable-element enumeration.

The static provider fetches pages over plain HTTP and cannot replay click
sequences; tasks that need clicks are reported as unsupported rather than
failed. A dynamic provider implementing the same contract can be attached
through the adapter wire protocol (see ``wire.py``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from urllib.parse import urljoin, urlparse

import requests

from . import htmldom
from .urltools import same_apex

log = logging.getLogger(__name__)

DENIAL_STATUSES = frozenset({401, 403, 429})


@dataclass
class PageSnapshot:
    final_url: str
    title: str
    html: str
    lang_attr: str | None
    capability: str  # "static" | "dynamic"
    _doc: htmldom.Document | None = field(default=None, repr=False, compare=False)

    def document(self) -> htmldom.Document:
        if self._doc is None:
            self._doc = htmldom.parse_html(self.html)
        return self._doc


@dataclass(frozen=True)
class ClickableElement:
    locator: str
    text: str
    kind: str  # "hyperlink" | "button_like"
    target_url: str | None = None


@dataclass(frozen=True)
class ProbeResult:
    domain: str
    status: str  # ok | no_http | redirect_offsite | non_english | error
    detail: str = ""


@dataclass
class LoadResult:
    status: str  # ok | unsupported | http_error | network_error | offsite_redirect
    snapshot: PageSnapshot | None = None
    http_status: int | None = None
    detail: str = ""
    requests_used: int = 0

    @property
    def denied(self) -> bool:
        return self.status == "http_error" and self.http_status in DENIAL_STATUSES


def make_snapshot(final_url: str, html: str, capability: str) -> PageSnapshot:
    doc = htmldom.parse_html(html)
    return PageSnapshot(final_url=final_url, title=doc.title(), html=html,
                        lang_attr=doc.lang_attr(), capability=capability, _doc=doc)


class StaticProvider:
    """Stateless-per-request HTTP fetcher with same-apex redirect policy."""

    capability = "static"

    def __init__(self, timeout: float = 10.0, redirect_limit: int = 10,
                 user_agent: str = "formnorms-crawler/0.1"):
        self.timeout = timeout
        self.redirect_limit = redirect_limit
        self.session = requests.Session()
        self.session.headers["User-Agent"] = user_agent

    def close(self) -> None:
        self.session.close()

    def load(self, task) -> LoadResult:
        if task.clicks:
            return LoadResult("unsupported",
                              detail="static provider cannot replay clicks")
        return self.fetch(task.start_url, task.origin_site)

    def fetch(self, url: str, origin_site: str,
              request_budget: int | None = None) -> LoadResult:
        """GET with manual redirect following; never fetches off the apex."""
        current = url
        hops = 0
        used = 0
        while True:
            if not same_apex(current, origin_site):
                return LoadResult("offsite_redirect", detail=current,
                                  requests_used=used)
            if request_budget is not None and used >= request_budget:
                return LoadResult("network_error", detail="request budget exhausted",
                                  requests_used=used)
            try:
                used += 1
                resp = self.session.get(current, timeout=self.timeout,
                                        allow_redirects=False)
            except requests.RequestException as exc:
                return LoadResult("network_error", detail=str(exc),
                                  requests_used=used)
            if resp.is_redirect or resp.status_code in (301, 302, 303, 307, 308):
                location = resp.headers.get("Location")
                if not location:
                    return LoadResult("http_error", http_status=resp.status_code,
                                      detail="redirect without Location",
                                      requests_used=used)
                hops += 1
                if hops > self.redirect_limit:
                    return LoadResult("network_error", detail="too many redirects",
                                      requests_used=used)
                current = urljoin(current, location)
                continue
            if resp.status_code >= 400:
                return LoadResult("http_error", http_status=resp.status_code,
                                  detail=f"HTTP {resp.status_code}",
                                  requests_used=used)
            return LoadResult("ok", snapshot=make_snapshot(current, resp.text,
                                                           self.capability),
                              requests_used=used)


def enumerate_clickables(snapshot: PageSnapshot) -> list[ClickableElement]:
    """All clickables in document order.

    Hyperlinks are anchors carrying href; button elements and any element
    with an inline onclick handler count as button-like.
    """
    doc = snapshot.document()
    out: list[ClickableElement] = []
    for el in doc.iter_elements():
        text = el.text()
        if el.tag == "a" and "href" in el.attrs:
            target = urljoin(snapshot.final_url, el.attrs["href"])
            out.append(ClickableElement(el.locator(), text, "hyperlink", target))
        elif el.tag == "button" or "onclick" in el.attrs:
            out.append(ClickableElement(el.locator(), text, "button_like", None))
    return out


def probe_domain(domain: str, provider: StaticProvider | None = None,
                 request_budget: int = 4) -> ProbeResult:
    """Pre-flight check for one apex domain, issuing at most 4 requests.

    Tries the bare and www hostnames over http/https, stopping at the first
    conclusive answer. Language is judged from the homepage lang attribute
    when present, else the stopword heuristic.
    """
    provider = provider or StaticProvider()
    candidates = [f"http://{domain}/", f"https://{domain}/"]
    host = domain.split(":")[0]
    if not host.replace(".", "").isdigit() and not host.startswith("www."):
        candidates += [f"http://www.{domain}/", f"https://www.{domain}/"]
    budget = request_budget
    saw_http_error = None
    for url in candidates:
        if budget <= 0:
            break
        result = provider.fetch(url, domain, request_budget=budget)
        budget -= max(1, result.requests_used)
        if result.status == "ok":
            snapshot = result.snapshot
            lang = snapshot.lang_attr
            if lang is not None:
                if not lang.strip().lower().startswith("en"):
                    return ProbeResult(domain, "non_english", detail=lang)
            else:
                from .dataset import detect_language
                if detect_language(snapshot) == "other":
                    return ProbeResult(domain, "non_english", detail="heuristic")
            return ProbeResult(domain, "ok", detail=snapshot.final_url)
        if result.status == "offsite_redirect":
            return ProbeResult(domain, "redirect_offsite", detail=result.detail)
        if result.status == "http_error":
            saw_http_error = result
    if saw_http_error is not None:
        return ProbeResult(domain, "error", detail=saw_http_error.detail)
    return ProbeResult(domain, "no_http", detail="no variant answered")


def is_http_url(url: str) -> bool:
    try:
        return urlparse(url).scheme in ("http", "https")
    except ValueError:
        return False
