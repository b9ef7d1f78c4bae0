"""Apex (registrable) domain handling backed by a public-suffix rule table."""
from __future__ import annotations

import ipaddress
import logging
from functools import lru_cache
from importlib import resources
from urllib.parse import urlparse

log = logging.getLogger(__name__)


class SuffixRules:
    """Public-suffix matcher implementing the standard list semantics."""

    def __init__(self, rules: list[str]):
        self.exact: set[tuple[str, ...]] = set()
        self.wildcard: set[tuple[str, ...]] = set()
        self.exception: set[tuple[str, ...]] = set()
        for rule in rules:
            rule = rule.strip().lower()
            if not rule or rule.startswith("//"):
                continue
            if rule.startswith("!"):
                self.exception.add(tuple(rule[1:].split(".")))
            elif rule.startswith("*."):
                self.wildcard.add(tuple(rule[2:].split(".")))
            else:
                self.exact.add(tuple(rule.split(".")))

    @classmethod
    def from_file(cls, path) -> "SuffixRules":
        with open(path, encoding="utf-8") as fh:
            return cls(fh.readlines())

    def public_suffix_len(self, labels: tuple[str, ...]) -> int:
        """Number of trailing labels forming the public suffix."""
        best = 1  # implicit default rule '*'
        for take in range(1, len(labels) + 1):
            tail = labels[-take:]
            if tail in self.exception:
                return take - 1
            if tail in self.exact:
                best = max(best, take)
            if take >= 2 and tail[1:] in self.wildcard:
                best = max(best, take)
        return best

    def registrable_domain(self, host: str) -> str | None:
        """The apex domain of ``host``; None when host is itself a suffix.

        IP literals are their own apex.
        """
        host = host.strip().rstrip(".").lower()
        if not host:
            return None
        if _is_ip(host):
            return host
        labels = tuple(host.split("."))
        if any(not lab for lab in labels):
            return None
        suffix_len = self.public_suffix_len(labels)
        if len(labels) <= suffix_len:
            return None
        return ".".join(labels[-(suffix_len + 1):])


def _is_ip(host: str) -> bool:
    try:
        ipaddress.ip_address(host.strip("[]"))
        return True
    except ValueError:
        return False


@lru_cache(maxsize=1)
def default_rules() -> SuffixRules:
    data = resources.files("formnorms.data").joinpath("public_suffix_list.dat")
    return SuffixRules(data.read_text(encoding="utf-8").splitlines())


def host_of(url: str) -> str | None:
    try:
        parsed = urlparse(url)
    except ValueError:
        return None
    if not parsed.hostname:
        return None
    return parsed.hostname


def apex_of(url_or_host: str, rules: SuffixRules | None = None) -> str | None:
    """Apex domain of a URL or bare hostname."""
    rules = rules or default_rules()
    candidate = url_or_host
    if "//" in candidate or candidate.startswith(("http:", "https:")):
        host = host_of(candidate)
    else:
        host = candidate.split("/")[0].split(":")[0]
    if not host:
        return None
    return rules.registrable_domain(host)


def same_apex(url: str, site: str, rules: SuffixRules | None = None) -> bool:
    """True iff ``url``'s registrable domain equals that of ``site``.

    ``site`` may be an apex domain, hostname, or URL. Unparseable input is
    never an error here: it logs a warning and compares as False.
    """
    rules = rules or default_rules()
    url_apex = apex_of(url, rules)
    site_apex = apex_of(site, rules)
    if url_apex is None or site_apex is None:
        log.warning("same_apex: unparseable input url=%r site=%r", url, site)
        return False
    return url_apex == site_apex
