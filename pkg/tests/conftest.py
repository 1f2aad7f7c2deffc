import numpy as np
import pytest

from anchor_sim import fim, scenario
from anchor_sim.scenario import desk_scenario, interval_schedule

# (criterion, passed, detail) lines collected by the acceptance tests
ACCEPTANCE: list[tuple[str, bool, str]] = []


def record(criterion: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
    print(line)
    ACCEPTANCE.append((criterion, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")


def make_model(sc, k=0, states=None, thresholds=None):
    states = sc.initial_states() if states is None else states
    prior = fim.initial_prior(sc, states)
    return fim.IntervalModel(sc, interval_schedule(sc, k), prior, thresholds)


@pytest.fixture(scope="session")
def desk3():
    return desk_scenario()


@pytest.fixture(scope="session")
def desk3_model(desk3):
    return make_model(desk3)


@pytest.fixture(scope="session")
def paper():
    return scenario.paper_scenario()


@pytest.fixture(scope="session")
def paper_model(paper):
    return make_model(paper)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
