import numpy as np
import pytest
from hypothesis import settings

from pvnne import synth

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def year():
    """Synthetic year at 15-minute resolution, seed 1."""
    return synth.generate_year(synth.SynthConfig(seed=1))


@pytest.fixture(scope="session")
def month(year):
    d = year.dates()
    return year.select_days(d[0], d[29])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}


@pytest.fixture(scope="session")
def criterion():
    """Record one acceptance line; the terminal summary prints them in order."""

    def record(number, ok, detail):
        _CRITERIA[number] = (bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
