import numpy as np
import pytest
from hypothesis import strategies as st

from compsub.network import build_network, network_from_biadjacency
from compsub.simulator import WorldSpec, simulate


@st.composite
def random_networks(draw, max_t=25, max_p=12):
    """Random 0/1 biadjacency with empty rows and columns removed."""
    seed = draw(st.integers(0, 2**32 - 1))
    n_t = draw(st.integers(3, max_t))
    n_p = draw(st.integers(2, max_p))
    density = draw(st.floats(0.1, 0.7))
    rng = np.random.default_rng(seed)
    a = (rng.random((n_t, n_p)) < density).astype(int)
    a[np.arange(n_t), rng.integers(n_p, size=n_t)] = 1
    a = a[:, a.sum(axis=0) > 0]
    return network_from_biadjacency(a)


@pytest.fixture(scope="session")
def world_net():
    """Network of the simulated world, seed 0, 1000 draws."""
    return build_network(simulate(WorldSpec(seed=0)).records)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(module.RESULTS, key=lambda l: int(l.split()[0][1:])):
        terminalreporter.write_line(line)
