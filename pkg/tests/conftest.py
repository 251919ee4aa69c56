import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from freeprob.measure import marchenko_pastur, measure_from_atoms, point_mass

DATA = Path(__file__).resolve().parents[1] / "data"

# lines collected by the acceptance suite, echoed at the end of every run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bernoulli():
    return measure_from_atoms([0.0, 2.0], [0.5, 0.5], label="bernoulli")


@pytest.fixture(scope="session")
def delta1():
    return point_mass(1.0, label="delta1")


@pytest.fixture(scope="session")
def mp():
    return marchenko_pastur(2000)


@pytest.fixture(scope="session")
def data_dir():
    return DATA


def random_measure(rng: np.random.Generator, lo=0.0, hi=2.0, max_atoms=7):
    k = int(rng.integers(1, max_atoms + 1))
    return measure_from_atoms(rng.uniform(lo, hi, k), rng.dirichlet(np.ones(k)))
