import numpy as np
import pytest

from modaljump import guiding, hilbert, models
from modaljump.errors import (GridMismatchError, NumericalError, ParameterMismatchError,
                              SnapshotCacheError)
from tests.helpers import make_model


def test_grid_spanning():
    grid = guiding.TimeGrid.spanning(20.0, 1e-3)
    assert grid.steps == 20000
    assert grid.size == 20001
    assert grid.t_final == pytest.approx(20.0)
    assert grid.index_of(0.5) == 500


def test_grid_rejects_outside_times():
    grid = guiding.TimeGrid.spanning(1.0, 1e-2)
    with pytest.raises(GridMismatchError):
        grid.index_of(1.5)
    with pytest.raises(GridMismatchError):
        guiding.TimeGrid(dt=0.0, steps=10)


def test_free_rabi_oscillation(free_rabi_run):
    model, _, result = free_rabi_run
    for j in (0, 250, 1000, 2000):
        t = result.grid.time(j)
        psi = result.state(j).reshape(2, -1)
        assert psi[0, 0] == pytest.approx(np.cos(2.5 * t), abs=1e-8)
        assert psi[1, 0] == pytest.approx(-1j * np.sin(2.5 * t), abs=1e-8)


def test_norm_is_preserved(single_mode_run):
    _, _, result = single_mode_run
    assert result.max_norm_error < 1e-8
    assert np.linalg.norm(result.final_state) == pytest.approx(1.0, abs=1e-8)


def test_strided_storage_reproduces_every_frame():
    model = make_model(cutoff=3)
    grid = guiding.TimeGrid.spanning(0.5, 1e-3)
    initial = hilbert.product_state(model.spec, 'excited')
    full = guiding.evolve(initial, model, grid)
    strided = guiding.evolve(initial, model, grid, snapshot_limit=model.spec.dim * 20)
    assert full.stride == 1
    assert strided.stride > 1
    for j in (0, 1, 37, 250, 499, 500):
        assert np.array_equal(full.state(j), strided.state(j))
    for j, state in strided.iter_states():
        if j % 97 == 0:
            assert np.array_equal(state, full.state(j))
    blocks = list(strided.iter_blocks(64))
    assert sum(len(states) for _, states in blocks) == grid.size


def test_evolve_validates_initial_state():
    model = make_model(cutoff=2)
    grid = guiding.TimeGrid.spanning(0.1, 1e-2)
    with pytest.raises(ParameterMismatchError):
        guiding.evolve(np.zeros(model.spec.dim + 1, dtype=complex), model, grid)
    with pytest.raises(ParameterMismatchError):
        guiding.evolve(2 * hilbert.product_state(model.spec, 'ground'), model, grid)


def test_non_finite_amplitudes_raise():
    model = make_model(cutoff=2)
    state = hilbert.product_state(model.spec, 'ground')
    state[1] = np.nan
    with pytest.raises(NumericalError):
        guiding.rk4_step(state, model, 0.0, 1e-3)


def test_leakage_flag_for_small_cutoff():
    model = make_model(cutoff=1)
    grid = guiding.TimeGrid.spanning(3.0, 1e-3)
    result = guiding.evolve(hilbert.product_state(model.spec, 'excited'), model, grid)
    assert result.leakage[0] == 0.0
    assert result.leakage_flag


def test_snapshot_cache(tmp_path):
    model = make_model(cutoff=3)
    grid = guiding.TimeGrid.spanning(0.2, 1e-3)
    result = guiding.evolve(hilbert.product_state(model.spec, 'ground'), model, grid)
    path = tmp_path / 'guiding.npz'
    guiding.save_guiding(path, result)
    loaded = guiding.load_guiding(path, model, grid)
    assert np.array_equal(loaded.state(200), result.state(200))
    with pytest.raises(SnapshotCacheError):
        guiding.load_guiding(path, make_model(rabi=4.0, cutoff=3), grid)
    with pytest.raises(SnapshotCacheError):
        guiding.load_guiding(tmp_path / 'missing.npz', model, grid)


def test_leakage_series_never_decreases():
    model = make_model(cutoff=1)
    grid = guiding.TimeGrid.spanning(3.0, 1e-3)
    result = guiding.evolve(hilbert.product_state(model.spec, 'excited'), model, grid)
    assert (np.diff(result.leakage) >= 0).all()
    assert result.peak_leakage == result.leakage[-1]


def test_rk4_converges_at_fourth_order():
    model = make_model(cutoff=6)
    initial = hilbert.product_state(model.spec, 'ground')
    finals = [guiding.evolve(initial, model, guiding.TimeGrid.spanning(1.0, dt)).final_state
              for dt in (0.02, 0.01, 0.005)]
    coarse = np.linalg.norm(finals[0] - finals[1])
    fine = np.linalg.norm(finals[1] - finals[2])
    assert np.log2(coarse / fine) == pytest.approx(4.0, abs=0.3)


def test_evolution_is_linear():
    model = make_model(rabi=3.0, couplings=(0.8 + 0.2j,), detunings=(0.5,), cutoff=4)
    grid = guiding.TimeGrid.spanning(0.5, 1e-3)
    first = hilbert.basis_state(model.spec, hilbert.GROUND, (1,))
    second = hilbert.basis_state(model.spec, hilbert.EXCITED, (0,))
    a, b = 0.6, 0.8j
    mixed = guiding.evolve(a * first + b * second, model, grid).final_state
    separate = (a * guiding.evolve(first, model, grid).final_state
                + b * guiding.evolve(second, model, grid).final_state)
    assert np.allclose(mixed, separate, rtol=0, atol=1e-12)


def test_excitation_number_is_constant_without_drive():
    model = make_model(rabi=0.0, couplings=(1.0, 0.6), detunings=(0.0, 1.5), cutoff=3)
    grid = guiding.TimeGrid.spanning(2.0, 1e-3)
    result = guiding.evolve(hilbert.product_state(model.spec, 'excited'), model, grid)
    n_exc = hilbert.excitation_number(model.spec)
    for j, state in result.iter_states():
        if j % 100 == 0:
            assert np.vdot(state, n_exc @ state).real == pytest.approx(1.0, abs=1e-8)
    assert abs(result.final_state[model.spec.flat_index(hilbert.EXCITED, (0, 0))]) < 0.99


def test_ground_vacuum_is_dark_without_drive():
    model = make_model(rabi=0.0, couplings=(1.0, 0.6), detunings=(0.0, 1.5), cutoff=3)
    grid = guiding.TimeGrid.spanning(2.0, 1e-3)
    initial = hilbert.product_state(model.spec, 'ground')
    result = guiding.evolve(initial, model, grid)
    assert np.array_equal(result.final_state, initial)
    assert result.leakage.max() == 0.0


@pytest.mark.slow
def test_single_mode_preset_window_needs_a_large_cutoff():
    grid = guiding.TimeGrid.spanning(20.0, 1e-3)
    preset = models.model_from_preset('single-mode')
    result = guiding.evolve(hilbert.product_state(preset.spec, 'ground'), preset, grid)
    assert not result.leakage_flag
    n_photons = hilbert.number_operator(preset.spec, 1)
    assert np.vdot(result.final_state, n_photons @ result.final_state).real > 10.0

    truncated = models.model_from_preset('single-mode', cutoff=20)
    result = guiding.evolve(hilbert.product_state(truncated.spec, 'ground'), truncated, grid)
    assert result.leakage_flag
