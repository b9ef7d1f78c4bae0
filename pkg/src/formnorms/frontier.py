"""Per-site crawl frontier: task priorities, the queue, and the site loop.

Priority of a candidate step is ``0.9^depth * (score + 0.05 * epsilon)``
where score is the max cosine similarity between the element text and the
seed phrases, and epsilon is drawn once per candidate from a seeded uniform
source so crawls replay bit-identically.
"""
from __future__ import annotations

import hashlib
import heapq
import logging
import random
import time
from dataclasses import dataclass, field

import numpy as np

from . import form_extract, page_provider
from .textsim import TrigramEmbedder, cosine
from .urltools import apex_of, same_apex

log = logging.getLogger(__name__)

DEPTH_DISCOUNT = 0.9
EPSILON_WEIGHT = 0.05
HOMEPAGE_PRIORITY = 1.0


class ConfigurationError(ValueError):
    pass


class FrontierExhausted(Exception):
    """Normal termination: no tasks left for the site."""


@dataclass(frozen=True)
class CrawlTask:
    start_url: str
    clicks: tuple[str, ...]
    depth: int
    priority: float
    origin_site: str

    def to_json(self) -> dict:
        return {"start_url": self.start_url, "clicks": list(self.clicks),
                "depth": self.depth, "priority": self.priority,
                "origin_site": self.origin_site}


class SeedPhraseSet:
    def __init__(self, phrases: list[str]):
        phrases = [p.strip() for p in phrases if p.strip()]
        if not phrases:
            raise ConfigurationError("seed phrase set is empty")
        seen = set()
        for phrase in phrases:
            folded = phrase.casefold()
            if folded in seen:
                raise ConfigurationError(f"duplicate seed phrase: {phrase!r}")
            seen.add(folded)
        self.phrases = phrases

    @classmethod
    def from_file(cls, path) -> "SeedPhraseSet":
        with open(path, encoding="utf-8") as fh:
            return cls(fh.read().splitlines())

    @classmethod
    def default(cls) -> "SeedPhraseSet":
        from importlib import resources
        data = resources.files("formnorms.data").joinpath("seed_phrases.txt")
        return cls(data.read_text(encoding="utf-8").splitlines())

    def __len__(self) -> int:
        return len(self.phrases)


class SeedScorer:
    """Precomputes seed embeddings so element scoring is a matrix product."""

    def __init__(self, seeds: SeedPhraseSet, embedder):
        if len(seeds) == 0:
            raise ConfigurationError("seed phrase set is empty")
        self.embedder = embedder
        self.matrix = np.stack([embedder.embed(p) for p in seeds.phrases])
        norms = np.linalg.norm(self.matrix, axis=1)
        if not np.all(np.isfinite(self.matrix)):
            raise ConfigurationError("seed embeddings are not finite")
        self._unit = np.divide(self.matrix, norms[:, None],
                               out=np.zeros_like(self.matrix), where=norms[:, None] > 0)

    def score(self, text: str) -> float:
        vec = self.embedder.embed(text)
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            return 0.0
        sims = self._unit @ (vec / norm)
        return float(np.clip(sims.max(), -1.0, 1.0))


def score_element(text: str, seeds: SeedPhraseSet, embedder) -> float:
    """Max cosine similarity between the element text and any seed phrase."""
    if len(seeds) == 0:
        raise ConfigurationError("seed phrase set is empty")
    vec = embedder.embed(text)
    return max(cosine(embedder.embed(phrase), vec) for phrase in seeds.phrases)


def task_priority(score: float, depth: int, epsilon: float) -> float:
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if not (0.0 <= epsilon < 1.0):
        raise ValueError("epsilon must lie in [0, 1)")
    return DEPTH_DISCOUNT ** depth * (score + EPSILON_WEIGHT * epsilon)


class Frontier:
    """Max-priority queue of crawl tasks; FIFO on ties."""

    def __init__(self):
        self._heap: list[tuple[float, int, CrawlTask]] = []
        self._counter = 0

    def push(self, task: CrawlTask) -> None:
        heapq.heappush(self._heap, (-task.priority, self._counter, task))
        self._counter += 1

    def pop_highest(self) -> CrawlTask:
        if not self._heap:
            raise FrontierExhausted
        return heapq.heappop(self._heap)[2]

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class TaskRecord:
    task: CrawlTask
    outcome: str
    forms_found: int = 0
    started_at: float = 0.0  # monotonic clock reading; not serialized

    def to_json(self) -> dict:
        return {"task": self.task.to_json(), "outcome": self.outcome,
                "forms_found": self.forms_found}


@dataclass
class CrawlReport:
    site: str
    records: list[TaskRecord] = field(default_factory=list)
    forms: list[form_extract.RawForm] = field(default_factory=list)
    pages: list[page_provider.PageSnapshot] = field(default_factory=list)
    failed: bool = False
    failure_reason: str = ""

    @property
    def tasks_executed(self) -> int:
        return len(self.records)


def _site_rng(seed: int, origin_site: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{origin_site}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def run_site(site_url: str, provider, scorer: SeedScorer,
             budget: int = 100, rate_limit: float = 10.0,
             rng_seed: int = 0, failure_cap: int = 5,
             proximity: int = form_extract.DEFAULT_PROXIMITY,
             clock=time.monotonic, sleep=time.sleep) -> CrawlReport:
    """Crawl one site: navigate, save forms, expand clickables into new tasks.

    Stops after ``budget`` tasks (failures included), paces task starts to
    ``rate_limit`` per minute, halts on denial responses, and abandons the
    site after ``failure_cap`` consecutive failures. The crawler only ever
    issues GET requests: forms are never submitted and no authentication is
    attempted.
    """
    origin = apex_of(site_url)
    if origin is None:
        report = CrawlReport(site=site_url, failed=True,
                             failure_reason="unparseable site URL")
        return report
    report = CrawlReport(site=origin)
    rng = _site_rng(rng_seed, origin)
    frontier = Frontier()
    home = CrawlTask(site_url, (), 0, HOMEPAGE_PRIORITY, origin)
    frontier.push(home)
    seen: set[tuple[str, tuple[str, ...]]] = {(home.start_url, home.clicks)}
    interval = 60.0 / rate_limit if rate_limit > 0 else 0.0
    last_start: float | None = None
    consecutive_failures = 0

    while report.tasks_executed < budget:
        try:
            task = frontier.pop_highest()
        except FrontierExhausted:
            break
        now = clock()
        if last_start is not None:
            wait = last_start + interval - now
            if wait > 0:
                sleep(wait)
                now = clock()
        last_start = now

        result = provider.load(task)
        record = TaskRecord(task=task, outcome=result.status, started_at=now)

        if result.status == "ok" and not same_apex(result.snapshot.final_url, origin):
            # dynamic providers may follow redirects themselves
            record.outcome = "offsite_redirect"
            result = page_provider.LoadResult("offsite_redirect",
                                              detail=result.snapshot.final_url)

        if result.status == "ok":
            consecutive_failures = 0
            snapshot = result.snapshot
            forms = form_extract.snapshot_forms(snapshot, proximity)
            record.forms_found = len(forms)
            report.forms.extend(forms)
            report.pages.append(snapshot)
            _expand(task, snapshot, frontier, seen, scorer, rng, origin)
        elif result.status == "unsupported":
            log.debug("task unsupported by provider: %s", task.start_url)
        elif result.status == "offsite_redirect":
            log.debug("offsite redirect skipped: %s", result.detail)
        else:
            if result.denied:
                record.outcome = "denied"
                report.records.append(record)
                report.failed = True
                report.failure_reason = f"denied ({result.detail})"
                break
            record.outcome = "failed"
            consecutive_failures += 1
            if consecutive_failures >= failure_cap:
                report.records.append(record)
                report.failed = True
                report.failure_reason = "consecutive failure cap reached"
                break
        report.records.append(record)
    return report


def _expand(task: CrawlTask, snapshot, frontier: Frontier,
            seen: set, scorer: SeedScorer, rng: random.Random,
            origin: str) -> None:
    for el in page_provider.enumerate_clickables(snapshot):
        if el.kind == "hyperlink":
            target = el.target_url
            if not target or not page_provider.is_http_url(target):
                continue
            if not same_apex(target, origin):
                continue
            new_start, new_clicks = target, ()
        else:
            new_start, new_clicks = task.start_url, task.clicks + (el.locator,)
        key = (new_start, new_clicks)
        if key in seen:
            continue
        seen.add(key)
        epsilon = rng.random()
        priority = task_priority(scorer.score(el.text), task.depth + 1, epsilon)
        frontier.push(CrawlTask(new_start, new_clicks, task.depth + 1,
                                priority, origin))


def default_scorer() -> SeedScorer:
    return SeedScorer(SeedPhraseSet.default(), TrigramEmbedder())
