import numpy as np
import pytest

from active_irs.channel import ChannelRealization, NoisePowers, Position3D, Scenario

DBM = lambda x: 10.0 ** ((x - 30.0) / 10.0)  # noqa: E731

NOISE = NoisePowers(sigma0_sq=DBM(-80), sigmaI_sq=DBM(-80))


def fig5_scenario(distance=50.0, transmit_dbm=20.0, num_elements=128):
    """BS at 2 m, user on the ground, IRS halfway between them at 2 m."""
    return Scenario(
        bs_pos=Position3D(0.0, 0.0, 2.0),
        user_pos=Position3D(distance, 0.0, 0.0),
        irs_pos=Position3D(distance / 2, 0.0, 2.0),
        num_elements=num_elements,
        transmit_power=DBM(transmit_dbm),
        noise=NOISE,
    )


def fig6_scenario(num_elements=8, transmit_dbm=20.0):
    return Scenario(
        bs_pos=Position3D(0.0, 0.0, 2.0),
        user_pos=Position3D(50.0, 0.0, 0.0),
        irs_pos=Position3D(2.0, 0.0, 2.0),
        num_elements=num_elements,
        transmit_power=DBM(transmit_dbm),
        noise=NOISE,
    )


def random_channel(rng, M, equal_gains=False, direct=False, scale=1e-2):
    if equal_gains:
        mag_g = np.full(M, rng.uniform(0.2, 2.0))
        mag_h = np.full(M, rng.uniform(0.2, 2.0))
    else:
        mag_g = rng.uniform(0.05, 2.0, M)
        mag_h = rng.uniform(0.05, 2.0, M)
    g = scale * mag_g * np.exp(2j * np.pi * rng.random(M))
    h = scale * mag_h * np.exp(2j * np.pi * rng.random(M))
    t = 0j
    if direct:
        t = scale ** 2 * rng.uniform(0.1, 3.0) * np.exp(2j * np.pi * rng.random())
    return ChannelRealization(g=g, h=h, t=t)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


# acceptance criteria report one line each at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
