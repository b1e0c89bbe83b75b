import numpy as np
import pytest

from majorcom.core import SPEED_OF_LIGHT, SystemConfig

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rate_cfg():
    """Ten carriers, four antennas each side, beam at 45 degrees."""
    return SystemConfig(n_carriers=10, n_active=2, n_tx=4, n_rx=4, steer_angle=np.pi / 4,
                        spacing=10 * SPEED_OF_LIGHT / 1.9e9, n_samples=100)


@pytest.fixture
def ber_cfg():
    """Seven carriers, six transmit antennas in groups of three, 70 samples."""
    return SystemConfig(n_samples=70)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
