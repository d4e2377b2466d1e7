"""Shared fixtures. Scenario specs are immutable, so build them once."""

import pytest

from chainplan.chain import SCENARIO_NAMES, get_scenario


@pytest.fixture(scope="session")
def catalog():
    return {name: get_scenario(name) for name in SCENARIO_NAMES}
