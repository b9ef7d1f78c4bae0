import json
from pathlib import Path

import pytest

from formnorms.page_provider import make_snapshot

FIXTURES = Path(__file__).parent / "fixtures"
FORM_CORPUS = FIXTURES / "form_corpus"


@pytest.fixture(scope="session")
def corpus_inventory():
    return json.loads((FORM_CORPUS / "inventory.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def corpus_snapshots():
    """page name -> PageSnapshot for every hand-built corpus page."""
    snapshots = {}
    for path in sorted(FORM_CORPUS.glob("p*.html")):
        html = path.read_text(encoding="utf-8")
        snapshots[path.name] = make_snapshot(f"http://corpus.test/{path.name}",
                                             html, "static")
    return snapshots


class FakeClock:
    """Deterministic clock whose sleep() advances time instantly."""

    def __init__(self, start: float = 1000.0):
        self.now_value = start
        self.sleeps: list[float] = []

    def now(self) -> float:
        # small fixed per-call cost keeps timestamps strictly increasing
        self.now_value += 0.001
        return self.now_value

    def sleep(self, seconds: float) -> None:
        assert seconds >= 0
        self.sleeps.append(seconds)
        self.now_value += seconds


@pytest.fixture
def fake_clock():
    return FakeClock()
