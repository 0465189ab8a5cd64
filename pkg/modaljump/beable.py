"""
Bell (beable) dynamics over a preferred projective measure on the bath.

A pointer configuration is a tuple of bath occupation numbers; its projector
is 1_sys (x) |n><n|, supported on the two composite indices of that bath
configuration. Because V_int is linear in the bath amplitudes, the probability
current J_nm vanishes unless n and m differ by one photon in one mode, so
rates are only ever evaluated for the <= 2 kappa neighbours of the current
configuration. Neighbour columns are ordered (up_1, down_1, up_2, down_2, ...).
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import hilbert
from .config.system_config import DEFAULT_DT, P_MAX, PROBABILITY_FLOOR
from .errors import DegenerateSliceError, ParameterMismatchError, StepSizeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreferredMeasure:
    """Projectors {1_sys (x) |n><n|} over spectral or temporal occupation numbers"""
    kind: str
    spec: hilbert.HilbertSpec

    @property
    def num_configs(self):
        return self.spec.bath_dim

    def configs(self):
        """All pointer configurations in flat bath order"""
        return [tuple(int(n) for n in row) for row in self.spec.occupation_table()]

    def index_of(self, config):
        return self.spec.bath_index(config)

    def config_of(self, bath_index):
        return self.spec.basis_index(bath_index).occupations

    def support(self, config):
        """Composite indices of the projector: (ground, excited) for this bath configuration"""
        bath = self.index_of(config)
        return np.array([bath, self.spec.bath_dim + bath])

    def projector(self, config):
        support = self.support(config)
        return sp.csr_matrix((np.ones(2, dtype=complex), (support, support)),
                             shape=(self.spec.dim, self.spec.dim))

    def slices(self, state):
        """Unnormalised conditioned states for every configuration, shape (bath_dim, 2)"""
        return np.asarray(state).reshape(2, self.spec.bath_dim).T

    def neighbour(self, config, column):
        """Target configuration of neighbour column (mode column // 2, up if even)"""
        mode, direction = divmod(column, 2)
        target = list(config)
        target[mode] += 1 if direction == 0 else -1
        return tuple(target)


@dataclass(frozen=True)
class RateTable:
    """Bell transition rates out of one configuration"""
    source: tuple
    targets: tuple
    rates: np.ndarray
    probability: float
    clamped: bool = False
    currents: np.ndarray = None

    @property
    def total(self):
        return float(self.rates.sum())

    def nonzero(self):
        return [(target, float(rate)) for target, rate in zip(self.targets, self.rates) if rate > 0]


def raising_current(upper, lower, coupling, occupation):
    """J_{m+e_k, m} = 2 sqrt(m_k + 1) Re(<psi_upper| X_k |psi_lower>)

    Elementwise over leading axes so batched and single evaluations agree bitwise.
    """
    x0 = coupling[0, 0] * lower[..., 0] + coupling[0, 1] * lower[..., 1]
    x1 = coupling[1, 0] * lower[..., 0] + coupling[1, 1] * lower[..., 1]
    amplitude = np.conj(upper[..., 0]) * x0 + np.conj(upper[..., 1]) * x1
    return 2.0 * np.sqrt(occupation + 1.0) * amplitude.real


def neighbour_currents(slices, couplings, configs, spec):
    """Currents J_{n,m} from each configuration m to its one-photon neighbours n

    Args:
        slices (np.ndarray): (bath_dim, 2) unnormalised conditioned states.
        couplings (np.ndarray): (kappa, 2, 2) atom couplings X_k(t).
        configs (np.ndarray): (M, kappa) integer occupations.
        spec (HilbertSpec): Composite space.

    Returns:
        np.ndarray: (M, 2 kappa) currents, zero for neighbours outside the truncation.
    """
    configs = np.asarray(configs, dtype=np.int64)
    strides = spec.strides
    index = configs @ strides
    own = slices[index]
    currents = np.zeros((configs.shape[0], 2 * spec.num_modes))
    for k in range(spec.num_modes):
        occupation = configs[:, k].astype(float)
        can_rise = configs[:, k] < spec.cutoff
        can_fall = configs[:, k] > 0
        upper = slices[np.where(can_rise, index + strides[k], index)]
        lower = slices[np.where(can_fall, index - strides[k], index)]
        up = raising_current(upper, own, couplings[k], occupation)
        down = -raising_current(own, lower, couplings[k], occupation - 1.0)
        currents[:, 2 * k] = np.where(can_rise, up, 0.0)
        currents[:, 2 * k + 1] = np.where(can_fall, down, 0.0)
    return currents


def rates_from_currents(currents, probabilities, dt, floor=PROBABILITY_FLOOR, p_max=P_MAX):
    """Bell's solution T_nm = max(J_nm, 0) / Pr(m), clamped for configurations below the floor

    Returns:
        tuple: (rates (M, 2 kappa), clamped mask (M,))
    """
    probabilities = np.asarray(probabilities, dtype=float)
    clamped = probabilities < floor
    denominator = np.where(probabilities > 0, probabilities, floor)
    rates = np.maximum(currents, 0.0) / denominator[:, None]
    if clamped.any():
        total = rates[clamped].sum(axis=1) * dt
        scale = np.where(total > p_max, p_max / np.where(total > 0, total, 1.0), 1.0)
        rates[clamped] *= scale[:, None]
    return rates, clamped


def select_jumps(uniforms, rates, dt):
    """Pick at most one jump per row: jump iff u < p = sum(T dt), target by cumulative T dt

    Returns:
        tuple: (column index or -1 per row, total jump probability per row)
    """
    cumulative = np.cumsum(rates * dt, axis=1)
    total = cumulative[:, -1]
    uniforms = np.asarray(uniforms, dtype=float)
    columns = (uniforms[:, None] >= cumulative).sum(axis=1)
    return np.where(uniforms < total, columns, -1), total


def born_probability(state, measure, config):
    """Pr(z_n, t) = <Psi| pi_n |Psi>"""
    support = measure.support(config)
    return float(np.sum(np.abs(np.asarray(state)[support]) ** 2))


def born_distribution(state, measure):
    """Born probabilities of all configurations in flat bath order"""
    return np.sum(np.abs(measure.slices(state)) ** 2, axis=1)


def check_measure(model, measure):
    if model.spec != measure.spec:
        raise ParameterMismatchError("measure and model live on different spaces")
    if model.basis_kind != measure.kind:
        raise ParameterMismatchError(
            f"{measure.kind} measure cannot unravel a {model.basis_kind}-basis model")


def current(state, model, measure, n, m, t):
    """Probability current J_nm(t) = 2 Im <Psi| pi_n (H_int + V_int(t)) pi_m |Psi>

    Evaluated on the unnormalised slices; the drive is bath-diagonal and never
    contributes. Antisymmetric by construction: J_nm is computed from the
    (upper, lower) ordered pair and negated for the reverse direction.
    """
    check_measure(model, measure)
    n = tuple(int(v) for v in n)
    m = tuple(int(v) for v in m)
    if n == m:
        raise ValueError("current needs two distinct configurations")
    measure.index_of(n)
    measure.index_of(m)
    difference = np.subtract(n, m)
    changed = np.flatnonzero(difference)
    if len(changed) != 1 or abs(difference[changed[0]]) != 1:
        return 0.0
    k = int(changed[0])
    upper, lower = (n, m) if difference[k] > 0 else (m, n)
    slices = measure.slices(state)
    coupling = model.couplings(t)[k]
    value = float(raising_current(slices[measure.index_of(upper)], slices[measure.index_of(lower)],
                                  coupling, float(lower[k])))
    return value if difference[k] > 0 else -value


def bell_rates(state, model, measure, m, t, dt=DEFAULT_DT, floor=PROBABILITY_FLOOR, p_max=P_MAX):
    """Transition rates out of configuration m over its one-photon neighbours

    Args:
        state (np.ndarray): Guiding state at time t.
        model (HamiltonianModel): Generator of the guiding state.
        measure (PreferredMeasure): Unravelling basis.
        m (tuple): Source configuration.
        t (float): Time.
        dt (float, optional): Step used for the floor clamp.

    Returns:
        RateTable: Rates per neighbour in column order.
    """
    check_measure(model, measure)
    m = tuple(int(v) for v in m)
    measure.index_of(m)
    slices = measure.slices(state)
    currents = neighbour_currents(slices, model.couplings(t), np.array([m]), measure.spec)
    probability = float(np.sum(np.abs(slices[measure.index_of(m)]) ** 2))
    rates, clamped = rates_from_currents(currents, np.array([probability]), dt, floor, p_max)
    if clamped[0]:
        logger.warning(f"Pr({m}) = {probability:.3g} below floor {floor:.3g} at t={t:.6g}; rates clamped")
    targets = tuple(measure.neighbour(m, c) for c in range(currents.shape[1]))
    return RateTable(source=m, targets=targets, rates=rates[0], probability=probability,
                     clamped=bool(clamped[0]), currents=currents[0])


def sample_step(config, rates, dt, rng, t=None, p_max=P_MAX):
    """Advance a pointer configuration by one step: at most one jump

    Args:
        config (tuple): Current configuration (must match rates.source).
        rates (RateTable): Rates out of config.
        dt (float): Step size.
        rng (np.random.Generator): Stream owned by this trajectory.

    Returns:
        tuple: The new configuration.
    """
    if tuple(config) != rates.source:
        raise ValueError(f"rate table is for {rates.source}, not {tuple(config)}")
    columns, total = select_jumps(np.array([rng.random()]), rates.rates[None, :], dt)
    if total[0] > 1.0:
        raise StepSizeError(t, float(total[0]))
    if total[0] > p_max:
        logger.warning(f"jump probability {total[0]:.3g} above {p_max} in one step at t={t}")
    if columns[0] < 0:
        return tuple(config)
    return rates.targets[columns[0]]


def conditioned_state(state, measure, config):
    """Normalised system state <n|Psi>/sqrt(N) and its weight N = Pr(n)"""
    slice_ = measure.slices(state)[measure.index_of(config)]
    weight = float(np.sum(np.abs(slice_) ** 2))
    if weight <= 0.0:
        raise DegenerateSliceError(f"configuration {tuple(config)} has zero probability")
    return slice_ / np.sqrt(weight), weight
