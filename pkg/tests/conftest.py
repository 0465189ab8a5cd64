"""
Shared fixtures: small spaces, models and guiding runs
"""
import numpy as np
import pytest

from modaljump import cli, guiding, hilbert, unravel
from modaljump.config.run_config import RunConfig
from tests.helpers import make_model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def single_mode_model():
    return make_model(cutoff=8)


@pytest.fixture
def three_mode_model():
    return make_model(rabi=20.0, couplings=(1.0, 1.0, 1.0), detunings=(-20.0, 0.0, 20.0), cutoff=3)


@pytest.fixture(scope='module')
def single_mode_run():
    """Single-mode preset physics on a short grid: (model, measure, guiding)"""
    model = make_model(cutoff=8)
    grid = guiding.TimeGrid.spanning(2.0, 1e-3)
    result = guiding.evolve(hilbert.product_state(model.spec, 'ground'), model, grid)
    return model, unravel.spectral_measure(model.spec), result


@pytest.fixture(scope='module')
def free_rabi_run():
    """g = 0: the atom only Rabi-oscillates"""
    model = make_model(couplings=(0.0,), cutoff=2)
    grid = guiding.TimeGrid.spanning(2.0, 1e-3)
    result = guiding.evolve(hilbert.product_state(model.spec, 'ground'), model, grid)
    return model, unravel.spectral_measure(model.spec), result


@pytest.fixture(scope='session')
def preset_run():
    """Integrate a preset at its default cutoff and window once per session: (config, model, guiding)"""
    runs = {}

    def run(name):
        if name not in runs:
            config = RunConfig.from_preset(name)
            model = cli.build_model(config)
            runs[name] = (config, model, cli.integrate(config, model))
        return runs[name]
    return run
