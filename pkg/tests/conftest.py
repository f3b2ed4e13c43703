from importlib.resources import files

import numpy as np
import pytest

from smrkit.mbvd import Branch, MBVDModel
from smrkit.stackfile import parse_materials_file, parse_stack_file
from smrkit.units import parse_grid

DATA = files("smrkit").joinpath("data")

# equivalent-circuit values of the measured 62 GHz device
DEVICE_MODEL = MBVDModel(
    rs=52.0,
    ls=0.06e-9,
    c0=45e-15,
    branches=(Branch(11.72e9, 0.0557, 6.0), Branch(40.38e9, 0.0334, 15.0), Branch(62.59e9, 0.008, 125.0)),
)


def stack_text(name="smr_62ghz.stack"):
    return DATA.joinpath(name).read_text()


@pytest.fixture(scope="session")
def library():
    return parse_materials_file(DATA.joinpath("materials.txt").read_text())


@pytest.fixture(scope="session")
def device_stack(library):
    return parse_stack_file(stack_text(), library)


@pytest.fixture(scope="session")
def wide_grid():
    return parse_grid("1GHz:67GHz:2000")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
