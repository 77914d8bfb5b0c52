import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from geodesic_lab import arithmetic, spectrum  # noqa: E402


@pytest.fixture(scope="session")
def bundled():
    return spectrum.load_bundled()


@pytest.fixture(scope="session")
def step_small():
    return arithmetic.length_spectrum(2.0e4)


@pytest.fixture(scope="session")
def step_large():
    # covers the A in [1e3, 1e6] sweeps, which integrate up to 2A
    return arithmetic.length_spectrum(2.0e6)


VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record a one-line criterion verdict, then assert it."""

    def record(n: int, ok: bool, detail: str) -> None:
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS):
            terminalreporter.write_line(line)
