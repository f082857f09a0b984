import numpy as np
import pytest

from porous_scaffold.polygonizer import polygonize, sample_field
from porous_scaffold.spline_core import TrivariateScalarField
from porous_scaffold.tpms_field import ImplicitFieldSpec, PeriodCoefficients, TpmsType

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def zero_tdf():
    return TrivariateScalarField.constant(0.0)


@pytest.fixture(scope="session")
def p_rod_spec():
    """P-type rod structure, two cells per axis."""
    return ImplicitFieldSpec(TpmsType.P, PeriodCoefficients.from_cells(2, 2, 2), "rod")


@pytest.fixture(scope="session")
def p_samples_100(p_rod_spec, zero_tdf):
    return sample_field(p_rod_spec, zero_tdf, 100)


@pytest.fixture(scope="session")
def p_rod_mesh_100(p_samples_100):
    return polygonize(p_samples_100, "rod")


@pytest.fixture(scope="session")
def p_pore_mesh_100(p_samples_100):
    return polygonize(p_samples_100, "pore")
