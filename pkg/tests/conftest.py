import numpy as np
import pytest

from submed.core import ObservationTable
from submed.simulation import TREATMENTS, StudyDGP, generate_study_dataset

_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")


@pytest.fixture(scope="session")
def sim1_n500():
    return generate_study_dataset(StudyDGP(1, 500, seed=3))


@pytest.fixture(scope="session")
def sim1_n2000():
    return generate_study_dataset(StudyDGP(1, 2000, seed=5))


@pytest.fixture(scope="session")
def sim2_large():
    return generate_study_dataset(StudyDGP(2, 20000, seed=8))


def all_profiles():
    """Each of the 27 profiles on {1,2,3}^3 once: an exactly uniform,
    independent treatment distribution."""
    g = np.array(np.meshgrid([1, 2, 3], [1, 2, 3], [1, 2, 3], indexing="ij")).reshape(3, -1).T
    return g.astype(float)


@pytest.fixture
def uniform_grid_table():
    Z = all_profiles()
    return ObservationTable(TREATMENTS, Z, np.zeros(len(Z)), np.zeros(len(Z)))
