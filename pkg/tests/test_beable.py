import logging

import numpy as np
import pytest

from modaljump import beable, hilbert, unravel
from modaljump.errors import DegenerateSliceError, ParameterMismatchError, StepSizeError
from tests.helpers import make_model, random_state


class FixedUniform:
    """Stand-in generator returning a preset uniform"""

    def __init__(self, value):
        self.value = value

    def random(self):
        return self.value


def dense_current(state, model, measure, n, m, t):
    h = model.hamiltonian(t)
    pi_n = measure.projector(n)
    pi_m = measure.projector(m)
    return 2.0 * np.imag(state.conj() @ (pi_n @ (h @ (pi_m @ state))))


def test_born_probability_of_product_state():
    spec = hilbert.build_space(1, 2)
    measure = unravel.spectral_measure(spec)
    psi = hilbert.product_state(spec, 'ground')
    assert beable.born_probability(psi, measure, (0,)) == 1.0
    assert beable.born_probability(psi, measure, (1,)) == 0.0


def test_born_distribution_sums_to_one(single_mode_run):
    _, measure, result = single_mode_run
    probabilities = beable.born_distribution(result.state(1234), measure)
    assert probabilities.sum() == pytest.approx(1.0, abs=1e-8)
    assert (probabilities >= 0).all()


def test_current_matches_dense_oracle(rng):
    model = make_model(rabi=3.0, couplings=(0.8 + 0.3j,), detunings=(0.4,), cutoff=3)
    measure = unravel.spectral_measure(model.spec)
    configs = measure.configs()
    for _ in range(100):
        psi = random_state(model.spec, rng)
        t = rng.uniform(0.0, 5.0)
        for n in configs:
            for m in configs:
                if n == m:
                    continue
                expected = dense_current(psi, model, measure, n, m, t)
                assert beable.current(psi, model, measure, n, m, t) == pytest.approx(expected, abs=1e-12)


def test_current_matches_dense_oracle_for_three_modes(rng):
    model = make_model(rabi=2.0, couplings=(1.0, 0.5j, 0.7), detunings=(-2.0, 0.0, 2.0), cutoff=2,
                       basis='temporal')
    measure = unravel.temporal_measure(model.spec, model)
    psi = random_state(model.spec, rng)
    for m in [(0, 0, 0), (1, 2, 0), (1, 1, 1)]:
        table = beable.bell_rates(psi, model, measure, m, 0.9)
        for target, j in zip(table.targets, table.currents):
            if all(0 <= v <= model.spec.cutoff for v in target):
                assert j == pytest.approx(dense_current(psi, model, measure, target, m, 0.9), abs=1e-12)
            else:
                assert j == 0.0


def test_single_mode_current_formula(rng):
    model = make_model(cutoff=4)
    measure = unravel.spectral_measure(model.spec)
    psi = random_state(model.spec, rng)
    b = model.spec.bath_dim
    for m in range(4):
        expected = 2 * np.sqrt(m + 1) * np.real(np.conj(psi[m + 1]) * psi[b + m])
        assert beable.current(psi, model, measure, (m + 1,), (m,), 0.0) == pytest.approx(expected, abs=1e-14)


def test_current_is_exactly_antisymmetric(rng):
    model = make_model(rabi=20.0, couplings=(1.0, 1.0, 1.0), detunings=(-20.0, 0.0, 20.0), cutoff=2)
    measure = unravel.spectral_measure(model.spec)
    psi = random_state(model.spec, rng)
    for n, m in [((1, 0, 0), (0, 0, 0)), ((1, 2, 1), (1, 1, 1)), ((0, 1, 2), (0, 1, 1))]:
        forward = beable.current(psi, model, measure, n, m, 0.3)
        assert forward == -beable.current(psi, model, measure, m, n, 0.3)
        assert forward != 0.0


def test_current_vanishes_without_coupling(free_rabi_run, rng):
    model, measure, _ = free_rabi_run
    psi = random_state(model.spec, rng)
    assert beable.current(psi, model, measure, (1,), (0,), 0.5) == 0.0


def test_current_vanishes_between_distant_configs(rng):
    model = make_model(rabi=2.0, couplings=(1.0, 1.0), detunings=(0.0, 1.0), cutoff=2)
    measure = unravel.spectral_measure(model.spec)
    psi = random_state(model.spec, rng)
    assert beable.current(psi, model, measure, (1, 1), (0, 0), 0.1) == 0.0
    assert beable.current(psi, model, measure, (2, 0), (0, 0), 0.1) == 0.0
    with pytest.raises(ValueError):
        beable.current(psi, model, measure, (1, 0), (1, 0), 0.1)


def test_measure_must_match_model(three_mode_model):
    temporal = unravel.temporal_measure(three_mode_model.spec)
    psi = hilbert.product_state(three_mode_model.spec, 'ground')
    with pytest.raises(ParameterMismatchError):
        beable.current(psi, three_mode_model, temporal, (1, 0, 0), (0, 0, 0), 0.0)


def test_rates_from_currents():
    rates, clamped = beable.rates_from_currents(np.array([[0.2, -0.2]]), np.array([0.5]), 1e-3)
    assert rates[0, 0] == pytest.approx(0.4)
    assert rates[0, 1] == 0.0
    assert not clamped[0]


def test_rates_are_clamped_below_floor():
    rates, clamped = beable.rates_from_currents(np.array([[1e-3, 0.0]]), np.array([1e-15]), 1e-3,
                                                floor=1e-12, p_max=0.1)
    assert clamped[0]
    assert rates[0].sum() * 1e-3 == pytest.approx(0.1)


def test_at_most_six_nonzero_rates(rng, three_mode_model):
    measure = unravel.spectral_measure(three_mode_model.spec)
    psi = random_state(three_mode_model.spec, rng)
    table = beable.bell_rates(psi, three_mode_model, measure, (1, 1, 1), 0.2)
    assert len(table.rates) == 6
    assert np.count_nonzero(table.currents) == 6
    assert len(table.nonzero()) <= 6
    assert np.array_equal(table.rates > 0, table.currents > 0)


def test_rates_at_vacuum_skip_missing_neighbours(single_mode_run):
    model, measure, result = single_mode_run
    table = beable.bell_rates(result.state(500), model, measure, (0,), result.grid.time(500))
    assert table.targets == ((1,), (-1,))
    assert table.rates[1] == 0.0


def test_probability_derivative_matches_net_current(single_mode_run):
    model, measure, result = single_mode_run
    dt = result.grid.dt
    for j in (300, 900, 1700):
        t = result.grid.time(j)
        before = beable.born_distribution(result.state(j - 1), measure)
        after = beable.born_distribution(result.state(j + 1), measure)
        slices = measure.slices(result.state(j))
        configs = np.array(measure.configs())
        currents = beable.neighbour_currents(slices, model.couplings(t), configs, model.spec)
        derivative = (after - before) / (2 * dt)
        assert np.allclose(derivative, -currents.sum(axis=1), rtol=1e-3, atol=1e-4)


def test_sample_step_without_rates():
    table = beable.RateTable(source=(2,), targets=((3,), (1,)), rates=np.zeros(2), probability=0.3)
    assert beable.sample_step((2,), table, 1e-3, FixedUniform(0.0)) == (2,)


def test_sample_step_is_a_bernoulli_trial():
    table = beable.RateTable(source=(1,), targets=((2,), (0,)), rates=np.array([0.0, 40.0]),
                             probability=0.3)
    assert beable.sample_step((1,), table, 1e-3, FixedUniform(0.039)) == (0,)
    assert beable.sample_step((1,), table, 1e-3, FixedUniform(0.041)) == (1,)


def test_sample_step_picks_target_by_cumulative_rate():
    table = beable.RateTable(source=(1, 1), targets=((2, 1), (0, 1), (1, 2), (1, 0)),
                             rates=np.array([10.0, 0.0, 30.0, 0.0]), probability=0.2)
    assert beable.sample_step((1, 1), table, 1e-3, FixedUniform(0.005)) == (2, 1)
    assert beable.sample_step((1, 1), table, 1e-3, FixedUniform(0.015)) == (1, 2)


def test_sample_step_rejects_oversized_steps():
    table = beable.RateTable(source=(0,), targets=((1,), (-1,)), rates=np.array([2000.0, 0.0]),
                             probability=0.1)
    with pytest.raises(StepSizeError):
        beable.sample_step((0,), table, 1e-3, FixedUniform(0.5), t=1.0)


def test_sample_step_warns_on_large_probability(caplog):
    caplog.set_level(logging.WARNING, logger='modaljump')
    table = beable.RateTable(source=(0,), targets=((1,), (-1,)), rates=np.array([200.0, 0.0]),
                             probability=0.1)
    beable.sample_step((0,), table, 1e-3, FixedUniform(0.9), t=1.0)
    assert 'above' in caplog.text


def test_jump_frequency_matches_rate():
    rng = unravel.trajectory_rng(unravel.trajectory_seed(7, 0))
    dt, rate, steps = 1e-3, 25.0, 200_000
    columns, _ = beable.select_jumps(rng.random(steps), np.full((steps, 1), rate), dt)
    observed = np.count_nonzero(columns >= 0) / steps
    expected = rate * dt
    assert abs(observed - expected) < 4 * np.sqrt(expected * (1 - expected) / steps)


def test_conditioned_state_examples():
    spec = hilbert.build_space(1, 2)
    measure = unravel.spectral_measure(spec)
    vacuum = hilbert.product_state(spec, 'ground')
    state, weight = beable.conditioned_state(vacuum, measure, (0,))
    assert np.allclose(state, [1, 0])
    assert weight == 1.0

    bell = (hilbert.basis_state(spec, hilbert.EXCITED, (1,))
            + hilbert.basis_state(spec, hilbert.GROUND, (0,))) / np.sqrt(2)
    state, weight = beable.conditioned_state(bell, measure, (1,))
    assert np.allclose(state, [0, 1])
    assert weight == pytest.approx(0.5)
    with pytest.raises(DegenerateSliceError):
        beable.conditioned_state(bell, measure, (2,))
