import numpy as np
import pytest
from hypothesis import settings

from d2dprice.netgen import GenParams, NetworkInstance, generate

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_inst():
    return generate(GenParams(n_cues=4, m_d2d=12, rng_seed=11))


@pytest.fixture(scope="session")
def table1_inst():
    return generate(GenParams(rng_seed=5))


@pytest.fixture
def line_inst():
    """One CUE, two pairs on a line, no shadowing: every gain is hand-checkable."""
    return NetworkInstance.from_positions(
        cue_xy=[[100.0, 0.0]],
        tx_xy=[[0.0, 200.0], [0.0, -200.0]],
        rx_xy=[[0.0, 220.0], [0.0, -230.0]],
        gamma_c_min=2.0, gamma_d_min=[1.0, 3.0],
    )


def random_allocation(rng, inst, admit_prob=0.7):
    from d2dprice.model import Allocation

    n, m = inst.n, inst.m
    ch = np.where(rng.random(m) < admit_prob, rng.integers(0, n, m), n)
    p_d = np.where(ch < n, rng.uniform(0, 1, m) * inst.p_d_max, 0.0)
    return Allocation(rng.uniform(0, 1, n) * inst.p_c_max, p_d, ch.astype(np.int64))


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
