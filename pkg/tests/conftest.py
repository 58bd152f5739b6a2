import numpy as np
import pytest

from g2048 import engine

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_board(gen: np.random.Generator, max_exponent: int = 11, fill: float | None = None) -> int:
    """Board with random occupancy; exponents drawn from 1..max_exponent."""
    p = gen.uniform(0.2, 1.0) if fill is None else fill
    cells = np.where(gen.random(16) < p, gen.integers(1, max_exponent + 1, 16), 0)
    return engine.from_cells(cells)


@pytest.fixture
def gen():
    return np.random.default_rng(20240601)
