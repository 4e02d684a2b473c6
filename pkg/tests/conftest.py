import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from qfctomo.config import config_from_dict
from qfctomo.grids import FrequencyGrid
from qfctomo.presets import bundled_config
from qfctomo.sim import PumpEnvelope, bs_shift

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def validation_cfg():
    return config_from_dict(bundled_config("validation"))


@pytest.fixture(scope="session")
def validation_greens(validation_cfg):
    from qfctomo.cli import simulate

    return simulate(validation_cfg)


@pytest.fixture(scope="session")
def fig1_pair():
    from qfctomo.cli import simulate

    gu = simulate(config_from_dict(bundled_config("fig1_unchirped")))
    gc = simulate(config_from_dict(bundled_config("fig1_chirped")))
    return gu, gc


@pytest.fixture
def small_grids():
    """64-point input band and its shifted output band."""
    p, q = PumpEnvelope(923.4, 3.0), PumpEnvelope(1557.9, 1000.0)
    gin = FrequencyGrid.from_wavelength_span(1553.0, 1559.0, 64, "in")
    gout = FrequencyGrid(gin.center_angular_frequency + bs_shift(p, q), gin.spacing, gin.count, "out")
    return p, q, gin, gout


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """criterion number -> (passed, detail); printed in the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(log):
        ok, detail = log[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
