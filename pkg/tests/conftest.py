import numpy as np
import pytest

from harvest_har.preprocess import fuse
from harvest_har.synth import default_scenario, generate_detailed


@pytest.fixture(scope="session")
def small_recording():
    """Eight-event synthetic recording and its fused series."""
    rec = generate_detailed(default_scenario(8, seed=3))
    return rec, fuse(rec.raw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_corpus():
    """The 64-event default corpus (seed 0) and its fused series."""
    rec = generate_detailed(default_scenario(64, seed=0))
    return rec, fuse(rec.raw)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, text: str) -> str:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {text}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
