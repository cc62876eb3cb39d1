import numpy as np
import pytest

from immigrationlab import rng

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def keys():
    return rng.replicate_keys(2024, 64)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def within(value, target, se, k):
    """|value - target| <= k * se, with a readable failure message."""
    assert abs(value - target) <= k * se, f"{value} vs {target}: {abs(value - target) / se:.2f} SE (limit {k})"


def product_se(x, y):
    """Standard error of mean(x * y) from the empirical second moment of the products."""
    p = np.asarray(x) * np.asarray(y)
    return p.std(ddof=1) / np.sqrt(len(p))
