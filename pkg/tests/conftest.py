from pathlib import Path

import pytest

from fleetcoop.routing import CoalitionOracle
from fleetcoop.scenario_io import load_scenario

DATA = Path(__file__).resolve().parents[1] / "src" / "fleetcoop" / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def case_b():
    return load_scenario(DATA / "case_b.toml")


@pytest.fixture(scope="session")
def case_b_oracle(case_b):
    return CoalitionOracle(case_b)


@pytest.fixture(scope="session")
def solo():
    return load_scenario(DATA / "solo.toml")


@pytest.fixture(scope="session")
def default_sweep():
    from fleetcoop.cli import load_sweep_spec, run_sweep

    return run_sweep(load_sweep_spec(DATA / "sweep.toml"))
