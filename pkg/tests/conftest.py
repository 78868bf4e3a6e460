from __future__ import annotations

import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

TESTS = Path(__file__).resolve().parent
FIXTURES = TESTS / "fixtures"
ROOT = TESTS.parent
CONFIGS = ROOT / "configs"

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def small_dump() -> Path:
    return FIXTURES / "small_dump.jsonl"


@pytest.fixture
def desk_dump() -> Path:
    return FIXTURES / "desk_dump.jsonl"


@pytest.fixture
def desk_config() -> Path:
    return CONFIGS / "desk.yaml"


PIPELINE_ORDER = ("ingest", "sample", "label", "simulate", "filter", "winrate", "score-preference", "rpm", "dynamics", "synthbench", "report")


def run_desk_pipeline(run_dir: Path, config: Path = CONFIGS / "desk.yaml", extra: tuple[str, ...] = ()) -> list[int]:
    """Run every stage through the CLI entry point; returns the exit codes."""
    from valuescope.cli import main

    return [main([stage, "--config", str(config), "--run-dir", str(run_dir), *extra]) for stage in PIPELINE_ORDER]


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory) -> Path:
    """One complete offline desk run, shared read-only across tests."""
    run_dir = tmp_path_factory.mktemp("desk") / "run"
    codes = run_desk_pipeline(run_dir)
    assert codes == [0] * len(PIPELINE_ORDER)
    return run_dir


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
