import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cavity_spdc.scenario import bundled_scenario  # noqa: E402


@pytest.fixture(scope="session")
def paper():
    return bundled_scenario("paper")


@pytest.fixture(scope="session")
def paper_smoke(paper):
    """Relaxed-guard 257 x 257 grid for fast structural tests."""
    return paper.with_grid(n=257, relaxed_guard=True)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
