from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lrtdvc.media_io import load_pgm

DATA = Path(__file__).parent / "data"
GOLDEN = Path(__file__).parent / "golden"

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def corpus_frames() -> dict:
    return {p.stem: load_pgm(p) for p in sorted(DATA.glob("*.pgm"))}


@pytest.fixture(scope="session")
def corpus():
    return corpus_frames()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
