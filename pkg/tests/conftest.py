import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from daor.channel import ArrayGeometry, ChannelConfig, sample_channel

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_complex(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def table_channel(seed, n_t=16, n_r=8):
    cfg = ChannelConfig(ArrayGeometry(n_t, 0.5e-3, 1e-3), ArrayGeometry(n_r, 0.5e-3, 1e-3))
    return sample_channel(cfg, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
