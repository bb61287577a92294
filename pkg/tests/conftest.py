import numpy as np
import pytest

from cbmorph.models import build_lattice, build_resonator_cell, generator_for


@pytest.fixture(scope="session")
def lattice():
    return build_lattice(5e-3, 1e6, 0.9e6)


@pytest.fixture(scope="session")
def resonator():
    return build_resonator_cell(10.0, 40.0)


@pytest.fixture(scope="session")
def resonator_gen():
    return generator_for("resonator")


@pytest.fixture(scope="session")
def lattice_gen():
    return generator_for("lattice", {"vary": ["k2"]})


def random_spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ np.diag(np.geomspace(1.0, cond, n)) @ Q.T


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
