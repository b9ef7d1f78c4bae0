"""Annotated-form records, the cleaning pipeline, and site categorization."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .annotate import AUXILIARY_PI_TYPES, IDENTIFIER_PI_TYPES

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1

ENGLISH_STOPWORDS = frozenset("""
the of and a to in is was that it for on as with by at from this be are or
an they which you we have not had his her their has but were all can when
there one if would who what about out up them then its these so him into
more no time could than other some very your my our me us will just over
also any only new may such
""".split())

STOPWORD_MIN_TOKENS = 20
STOPWORD_RATIO = 0.1


@dataclass(frozen=True, order=True)
class WebsiteCategory:
    level1: str
    level2: str | None = None

    def __str__(self) -> str:
        return f"{self.level1}/{self.level2}" if self.level2 else self.level1

    @classmethod
    def parse(cls, text: str) -> "WebsiteCategory":
        level1, _, level2 = text.partition("/")
        return cls(level1.strip(), level2.strip() or None)


@dataclass
class AnnotatedForm:
    """One annotated record: site, its categories, the form type, and the PI
    types collected."""
    domain: str
    categories: frozenset[WebsiteCategory]
    form_type: str
    pi_types: frozenset[str]
    form_id: str
    synthetic: bool = False
    page_lang: str = "unknown"  # en | other | unknown

    def to_json(self) -> dict:
        return {"domain": self.domain,
                "categories": sorted(str(c) for c in self.categories),
                "form_type": self.form_type,
                "pi_types": sorted(self.pi_types),
                "form_id": self.form_id,
                "synthetic": self.synthetic,
                "page_lang": self.page_lang}

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotatedForm":
        return cls(domain=obj["domain"],
                   categories=frozenset(WebsiteCategory.parse(c)
                                        for c in obj.get("categories", [])),
                   form_type=obj["form_type"],
                   pi_types=frozenset(obj.get("pi_types", [])),
                   form_id=obj["form_id"],
                   synthetic=obj.get("synthetic", False),
                   page_lang=obj.get("page_lang", "unknown"))


@dataclass
class CleaningReport:
    input_count: int = 0
    dropped_non_english: int = 0
    dropped_no_pi: int = 0
    dropped_no_identifier: int = 0
    kept: int = 0

    def to_json(self) -> dict:
        return {"input_count": self.input_count,
                "dropped_non_english": self.dropped_non_english,
                "dropped_no_pi": self.dropped_no_pi,
                "dropped_no_identifier": self.dropped_no_identifier,
                "kept": self.kept}


def clean(records: list[AnnotatedForm]) -> tuple[list[AnnotatedForm], CleaningReport]:
    """Staged cleanup: drop non-English pages, then forms with no recognized
    PI after auxiliary labels are removed, then forms collecting no personal
    identifier. Kept records carry auxiliary-free PI sets, which makes the
    whole pass idempotent.
    """
    report = CleaningReport(input_count=len(records))
    kept: list[AnnotatedForm] = []
    for record in records:
        if record.page_lang == "other":
            report.dropped_non_english += 1
            continue
        pi = frozenset(record.pi_types) - AUXILIARY_PI_TYPES
        if not pi:
            report.dropped_no_pi += 1
            continue
        if not (pi & IDENTIFIER_PI_TYPES):
            report.dropped_no_identifier += 1
            continue
        if pi != record.pi_types:
            record = AnnotatedForm(record.domain, record.categories,
                                   record.form_type, pi, record.form_id,
                                   record.synthetic, record.page_lang)
        kept.append(record)
    report.kept = len(kept)
    return kept, report


def detect_language(snapshot) -> str:
    """en | other | unknown. The lang attribute decides when present; else an
    English-stopword ratio over visible text when there is enough of it."""
    lang = getattr(snapshot, "lang_attr", None)
    if lang:
        return "en" if lang.strip().lower().startswith("en") else "other"
    doc = snapshot.document()
    tokens = [t.lower() for t in doc.visible_text().split() if t.isalpha()]
    if len(tokens) < STOPWORD_MIN_TOKENS:
        return "unknown"
    hits = sum(1 for t in tokens if t in ENGLISH_STOPWORDS)
    return "en" if hits / len(tokens) >= STOPWORD_RATIO else "other"


class CategoryTaxonomy:
    def __init__(self, entries: set[WebsiteCategory]):
        self.entries = entries

    def __contains__(self, category: WebsiteCategory) -> bool:
        return category in self.entries

    @classmethod
    def default(cls) -> "CategoryTaxonomy":
        from importlib import resources
        data = resources.files("formnorms.data").joinpath("category_taxonomy.txt")
        entries = set()
        for line in data.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                entries.add(WebsiteCategory.parse(line))
        return cls(entries)


class CategoryMapping:
    """domain -> categories, loaded from a TSV file of domain, level1, level2
    rows (one row per category; multi-category sites repeat the domain)."""

    def __init__(self, mapping: dict[str, frozenset[WebsiteCategory]]):
        self.mapping = mapping

    @classmethod
    def from_tsv(cls, path, taxonomy: CategoryTaxonomy | None = None) -> "CategoryMapping":
        taxonomy = taxonomy or CategoryTaxonomy.default()
        raw: dict[str, set[WebsiteCategory]] = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) < 2:
                    log.warning("%s:%d: skipping malformed row", path, line_no)
                    continue
                domain = parts[0].strip().lower()
                level2 = parts[2].strip() if len(parts) > 2 else ""
                category = WebsiteCategory(parts[1].strip(), level2 or None)
                if category not in taxonomy:
                    log.warning("%s:%d: unknown category %s", path, line_no, category)
                    continue
                raw.setdefault(domain, set()).add(category)
        return cls({d: frozenset(cats) for d, cats in raw.items()})

    def categories(self, domain: str) -> frozenset[WebsiteCategory]:
        return self.mapping.get(domain.lower(), frozenset())


def categorize_site(domain: str, provider) -> frozenset[WebsiteCategory]:
    """Category lookup through a mapping or adapter; failures yield the empty
    set so the site still participates under wildcard contexts."""
    try:
        if isinstance(provider, CategoryMapping):
            return provider.categories(domain)
        return frozenset(provider(domain))
    except Exception as exc:
        log.warning("categorization failed for %s: %s", domain, exc)
        return frozenset()


def unique_site_count(records, predicate=None) -> int:
    if predicate is None:
        return len({r.domain for r in records})
    return len({r.domain for r in records if predicate(r)})


# ---------------------------------------------------------------------------
# JSONL persistence with a schema-versioned header line

def write_jsonl(path, records, schema: str, config_hash: str = "",
                rng_seed: int | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"_schema": f"{schema}/v{SCHEMA_VERSION}",
              "_config_hash": config_hash, "_rng_seed": rng_seed}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":"),
                            ensure_ascii=False) + "\n")
        for record in records:
            obj = record.to_json() if hasattr(record, "to_json") else record
            fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":"),
                                ensure_ascii=False) + "\n")


def read_jsonl(path, expected_schema: str | None = None):
    """Yield record dicts; validates the header when a schema is expected."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first:
            return
        header = json.loads(first)
        if "_schema" not in header:
            raise ValueError(f"{path}: missing schema header line")
        if expected_schema and not header["_schema"].startswith(expected_schema):
            raise ValueError(f"{path}: expected schema {expected_schema}, "
                             f"found {header['_schema']}")
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def load_annotated(path) -> list[AnnotatedForm]:
    return [AnnotatedForm.from_json(obj)
            for obj in read_jsonl(path, "annotated_forms")]
