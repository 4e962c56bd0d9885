import pytest

from flexbeam import headline_scenario, simulate, step_scenario


@pytest.fixture(scope="session")
def headline_result():
    return simulate(headline_scenario())


@pytest.fixture(scope="session")
def step_result():
    return simulate(step_scenario())
