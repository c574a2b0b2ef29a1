import pytest

from questsim.cards import load_scenario_bundle

import helpers


@pytest.fixture(scope="session")
def synth_db():
    return helpers.make_db()


@pytest.fixture(scope="session")
def synth_scenario():
    return helpers.make_scenario()


@pytest.fixture(scope="session")
def shipped():
    """The scenario and card set installed with the package."""
    return load_scenario_bundle()


@pytest.fixture
def game(synth_scenario):
    return helpers.new_synth_game(seed=1, scenario=synth_scenario)
