from __future__ import annotations

import itertools
from pathlib import Path

import pytest

from newsline.core import Timeline, Topic
from newsline.datasets import load_dataset
from newsline.llm.gateway import Gateway, TranscriptCache
from newsline.pipeline import Services
from newsline.retrieval.base import FixtureSearchProvider

from sim import SimulatedLLM

FIXTURES = Path(__file__).parent / "fixtures"

# acceptance criterion -> "PASS" / "FAIL" / "SKIP", filled by test_acceptance
ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in ACCEPTANCE.items():
        terminalreporter.write_line(f"{status:<4}  {name}")


def tick_clock():
    """Deterministic clock: advances one millisecond per reading."""
    counter = itertools.count()
    return lambda: next(counter) / 1000.0


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def fixture_topic() -> Topic:
    return load_dataset(FIXTURES / "topic.json").topics[0]


@pytest.fixture
def replay_services():
    """Factory for services that replay the recorded session offline."""

    def make() -> Services:
        gateway = Gateway(
            None, TranscriptCache(FIXTURES / "transcripts.jsonl"), replay_only=True, model_tag=SimulatedLLM.model_tag
        )
        provider = FixtureSearchProvider.from_file(FIXTURES / "search_fixture.json")
        return Services(gateway, provider, clock=tick_clock())

    return make


@pytest.fixture
def sim():
    return SimulatedLLM()


@pytest.fixture
def sim_gateway(sim):
    return Gateway(sim, TranscriptCache())


def tl(*pairs) -> Timeline:
    """Timeline from ``("YYYY-MM-DD", "summary")`` pairs."""
    return Timeline.from_json([{"start": d, "summary": s} for d, s in pairs])
