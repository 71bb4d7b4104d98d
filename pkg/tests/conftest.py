import numpy as np
import pytest

from bosegibbs.lattice import Graph

GRAPHS = [Graph(1), Graph.path(2), Graph(2), Graph.path(3), Graph.complete(3)]


def random_instance(rng, g):
    V = g.vertex_count
    u = rng.normal(size=V) + 1j * rng.normal(size=V)
    f = rng.normal(size=V) + 1j * rng.normal(size=V)
    beta = rng.uniform(0.2, 2.0)
    kappa = -rng.uniform(0.2, 2.0)
    lam = rng.uniform(0.1, 2.0)
    return u, f, beta, kappa, lam


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
