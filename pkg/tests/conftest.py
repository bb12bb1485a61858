import numpy as np
import pytest

from intrep.numerics import rng_stream


@pytest.fixture
def rng():
    return rng_stream(12345, 0)


def ks_uniform_p(values) -> float:
    from scipy import stats
    return float(stats.kstest(np.asarray(values).ravel(), "uniform").pvalue)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
