"""Privacy-policy link detection and collected-vs-disclosed comparison."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import re
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urljoin, urlparse

from .htmldom import parse_html
from .textsim import TrigramEmbedder, cosine

log = logging.getLogger(__name__)

POLICY_SEED_PHRASES = (
    "privacy policy",
    "privacy notice",
    "privacy statement",
    "privacy center",
    "privacy & terms",
    "privacy & cookies notice",
)

COSINE_THRESHOLD = 0.75

# the PI types whose disclosures map cleanly onto form annotations
MAPPABLE_PI_TYPES = ("Email Address", "Phone Number", "Person Name", "Address",
                     "Date of Birth", "Age", "Tax ID", "Gender", "Ethnicity")

_SEPARATORS = re.compile(r"[\s/_\-.+&]+")


@dataclass(frozen=True)
class PolicyLink:
    url: str
    anchor_text: str
    match_kind: str  # "cosine" | "substring"
    score: float
    location: str  # "in_form" | "on_page"

    def to_json(self) -> dict:
        return {"url": self.url, "anchor_text": self.anchor_text,
                "match_kind": self.match_kind, "score": self.score,
                "location": self.location}


def _normalize_for_matching(text: str) -> str:
    return _SEPARATORS.sub(" ", text).strip().casefold()


def _url_match_text(url: str) -> str:
    """The path/query part of a URL with separators opened up for matching."""
    try:
        parsed = urlparse(url)
    except ValueError:
        return _normalize_for_matching(url)
    return _normalize_for_matching(f"{parsed.path} {parsed.query}")


class PolicyLinkDetector:
    def __init__(self, embedder: TrigramEmbedder | None = None,
                 seeds: tuple[str, ...] = POLICY_SEED_PHRASES,
                 threshold: float = COSINE_THRESHOLD):
        self.embedder = embedder or TrigramEmbedder()
        self.seeds = seeds
        self.threshold = threshold
        self._seed_vectors = [self.embedder.embed(s) for s in seeds]
        self._seed_normalized = [_normalize_for_matching(s) for s in seeds]

    def _cosine_score(self, link_text: str, url: str) -> float:
        best = 0.0
        for candidate in (link_text, _url_match_text(url)):
            if not candidate.strip():
                continue
            vec = self.embedder.embed(candidate)
            for seed_vec in self._seed_vectors:
                best = max(best, cosine(seed_vec, vec))
        return best

    def _substring_match(self, link_text: str, url: str) -> bool:
        text_norm = _normalize_for_matching(link_text)
        url_norm = _url_match_text(url)
        return any(seed in text_norm or seed in url_norm
                   for seed in self._seed_normalized)

    def detect(self, html: str, scope: str = "page",
               base_url: str = "") -> list[PolicyLink]:
        """Policy links in a markup fragment.

        The best-scoring link qualifies when its cosine score exceeds the
        threshold; any link whose text or URL contains a seed phrase (with
        separators normalized, so "privacy-policy" matches) qualifies too.
        scope only labels where the fragment came from: pass a form subtree
        to restrict detection to links inside the form.
        """
        location = "in_form" if scope == "form" else "on_page"
        doc = parse_html(html)
        candidates = []
        for el in doc.iter_elements():
            if el.tag != "a" or "href" not in el.attrs:
                continue
            url = urljoin(base_url, el.attrs["href"]) if base_url else el.attrs["href"]
            text = el.text()
            candidates.append((url, text, self._cosine_score(text, url),
                               self._substring_match(text, url)))
        if not candidates:
            return []
        best_index = max(range(len(candidates)), key=lambda i: candidates[i][2])
        out = []
        for i, (url, text, score, substr) in enumerate(candidates):
            if i == best_index and score > self.threshold:
                out.append(PolicyLink(url, text, "cosine", score, location))
            elif substr:
                out.append(PolicyLink(url, text, "substring", score, location))
        return out


def detect_policy_links(html: str, scope: str = "page", base_url: str = "",
                        detector: PolicyLinkDetector | None = None) -> list[PolicyLink]:
    return (detector or PolicyLinkDetector()).detect(html, scope, base_url)


# ---------------------------------------------------------------------------
# disclosure extraction

# precision-oriented curated phrases per mappable PI type; matched on word
# boundaries over casefolded policy text, no negation handling
DISCLOSURE_PHRASES: dict[str, tuple[str, ...]] = {
    "Email Address": ("email address", "e-mail address", "email addresses"),
    "Phone Number": ("phone number", "telephone number", "mobile number",
                     "phone numbers"),
    "Person Name": ("your name", "first and last name", "full name",
                    "first name", "last name", "name and surname"),
    "Address": ("postal address", "mailing address", "street address",
                "billing address", "shipping address", "home address",
                "physical address"),
    "Date of Birth": ("date of birth", "birth date", "birthdate", "birthday"),
    "Age": ("your age", "age range", "age group", "age information"),
    "Tax ID": ("social security number", "tax identification number",
               "taxpayer identification number", "tax id"),
    "Gender": ("gender",),
    "Ethnicity": ("ethnicity", "ethnic origin", "racial or ethnic origin",
                  "race or ethnicity"),
}


def extract_disclosures(policy_text: str, extractor=None) -> frozenset[str]:
    """PI types a policy text discloses, restricted to the mappable nine.

    ``extractor`` may be a callable or an external command (list of argv
    strings) invoked with the policy text file path and expected to print
    JSON {"disclosed": [...]}. Without one, the builtin phrase baseline runs.
    """
    if extractor is None:
        return _baseline_disclosures(policy_text)
    if callable(extractor):
        disclosed = extractor(policy_text)
    else:
        disclosed = _run_extractor_command(extractor, policy_text)
    return frozenset(d for d in disclosed if d in MAPPABLE_PI_TYPES)


def _baseline_disclosures(policy_text: str) -> frozenset[str]:
    text = " ".join(policy_text.split()).casefold()
    found = set()
    for pi_type, phrases in DISCLOSURE_PHRASES.items():
        for phrase in phrases:
            if re.search(rf"(?<![0-9a-z]){re.escape(phrase)}(?![0-9a-z])", text):
                found.add(pi_type)
                break
    return frozenset(found)


def _run_extractor_command(command: list[str], policy_text: str) -> list[str]:
    with tempfile.NamedTemporaryFile("w", suffix=".txt", delete=False,
                                     encoding="utf-8") as fh:
        fh.write(policy_text)
        path = fh.name
    try:
        proc = subprocess.run([*command, path], capture_output=True,
                              timeout=120, check=True)
        payload = json.loads(proc.stdout.decode("utf-8"))
        return list(payload["disclosed"])
    finally:
        Path(path).unlink(missing_ok=True)


def policy_cache_path(cache_dir, url: str) -> Path:
    digest = hashlib.sha256(url.encode("utf-8")).hexdigest()[:24]
    return Path(cache_dir) / f"{digest}.html"


# ---------------------------------------------------------------------------
# collected vs disclosed

@dataclass
class DisclosureComparison:
    pi_type: str
    n_cp: int           # collected and disclosed
    n_c_only: int       # collected, not disclosed (C \ P)
    n_p_only: int       # disclosed, not observed (P \ C)
    n_neither: int
    p_omitted: float | None       # |C&P| / |C|, per the published table
    p_notcollected: float | None  # |P\C| / |P|
    omission_rate: float | None   # 1 - p_omitted, the plain-language reading
    phi: float | None

    def to_json(self) -> dict:
        return {"pi_type": self.pi_type, "n_cp": self.n_cp,
                "n_c_only": self.n_c_only, "n_p_only": self.n_p_only,
                "n_neither": self.n_neither, "p_omitted": self.p_omitted,
                "p_notcollected": self.p_notcollected,
                "omission_rate": self.omission_rate, "phi": self.phi}


def compare(collected: dict[str, frozenset[str]],
            disclosed: dict[str, frozenset[str]],
            pi_type: str) -> DisclosureComparison:
    """Contingency of collection vs disclosure for one PI type.

    Both maps must cover the same analyzed-site universe.
    """
    if set(collected) != set(disclosed):
        raise ValueError("collected and disclosed must cover the same sites")
    n_cp = n_c_only = n_p_only = n_neither = 0
    for site in collected:
        c = pi_type in collected[site]
        p = pi_type in disclosed[site]
        if c and p:
            n_cp += 1
        elif c:
            n_c_only += 1
        elif p:
            n_p_only += 1
        else:
            n_neither += 1
    total_c = n_cp + n_c_only
    total_p = n_cp + n_p_only
    p_omitted = n_cp / total_c if total_c else None
    p_notcollected = n_p_only / total_p if total_p else None
    omission = 1.0 - p_omitted if p_omitted is not None else None
    return DisclosureComparison(pi_type, n_cp, n_c_only, n_p_only, n_neither,
                                p_omitted, p_notcollected, omission,
                                phi(n_cp, n_c_only, n_p_only, n_neither))


def phi(n11: int, n10: int, n01: int, n00: int) -> float | None:
    """Association strength of two binary indicators from a 2x2 table.

    None when any margin is zero (the coefficient is undefined there).
    """
    if min(n11, n10, n01, n00) < 0:
        raise ValueError("counts must be non-negative")
    margins = ((n11 + n10), (n01 + n00), (n11 + n01), (n10 + n00))
    if any(m == 0 for m in margins):
        return None
    numerator = n11 * n00 - n10 * n01
    denominator = math.sqrt(math.prod(float(m) for m in margins))
    return numerator / denominator
