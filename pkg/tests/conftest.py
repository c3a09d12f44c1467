import time

import pytest

from vtprune import ModelSpec, init_model
from vtprune.cli import main as cli_main

SUITE_BUDGET_SECONDS = 60.0

_session_start = time.perf_counter()


def session_elapsed() -> float:
    return time.perf_counter() - _session_start


@pytest.fixture(scope="session")
def tiny_model():
    """Small model for unit tests; toy defaults are exercised in the acceptance suite."""
    return init_model(ModelSpec(layers=4, heads=2, channels=32, vocab=64, max_seq=256, seed=1))


@pytest.fixture(scope="session")
def default_model():
    return init_model(ModelSpec())


@pytest.fixture(scope="session")
def shipped_corpus(tmp_path_factory):
    """The default mixed corpus exactly as `vtprune generate` ships it."""
    out = tmp_path_factory.mktemp("corpus")
    assert cli_main(["generate", "--out", str(out)]) == 0
    return out


def pytest_collection_modifyitems(config, items):
    """Run the acceptance criteria last so the suite-runtime criterion sees the whole run."""
    items.sort(key=lambda item: item.fspath.basename == "test_acceptance.py")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = session_elapsed()
    terminalreporter.write_line(
        f"total suite wall time: {elapsed:.1f}s (budget {SUITE_BUDGET_SECONDS:.0f}s)"
    )
