import numpy as np
import pytest

from finsler_pohozaev import ConstantSource, Euclidean, GridField, Profile, StarDomain, torsion_oracle

ACCEPTANCE_LINES = []


def torsion_case(p, n, radius=1.0):
    d = StarDomain.disk(radius, n, n)
    u = GridField.from_function(d, torsion_oracle(p, 2, radius))
    return u, ConstantSource(1.0), Profile.power(p), Euclidean(2), d


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
