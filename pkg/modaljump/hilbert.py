"""
Composite Hilbert space of a two-level atom and kappa truncated bosonic modes.

Basis ordering: atom slowest (ground=0, excited=1), then mode 1, ..., mode kappa,
each mode running over Fock levels 0..cutoff. A state vector reshaped to
(2, bath_dim) therefore has the ground-state bath amplitudes in row 0 and the
excited-state bath amplitudes in row 1.
"""
import logging
from dataclasses import dataclass
from math import factorial, sqrt

import numpy as np
import scipy.sparse as sp

from .config.system_config import MAX_DIMENSION
from .errors import DimensionOverflowError, ModeIndexError, ParameterMismatchError

logger = logging.getLogger(__name__)

GROUND = 0
EXCITED = 1

# 2x2 atom operators in (ground, excited) index order
SIGMA_LOWER = np.array([[0, 1], [0, 0]], dtype=complex)   # |b><e|
SIGMA_RAISE = SIGMA_LOWER.conj().T                        # |e><b|
SIGMA_X = SIGMA_LOWER + SIGMA_RAISE
SIGMA_Y = 1j * (SIGMA_LOWER - SIGMA_RAISE)
SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)            # |e><e| - |b><b|

# sigma_x eigenstates and ladder operators |sx=+-1><sx=-+1|
SX_PLUS_STATE = np.array([1, 1], dtype=complex) / sqrt(2)    # (|e> + |b>)/sqrt2
SX_MINUS_STATE = np.array([-1, 1], dtype=complex) / sqrt(2)  # (|e> - |b>)/sqrt2
SIGMA_X_PLUS = np.outer(SX_PLUS_STATE, SX_MINUS_STATE.conj())
SIGMA_X_MINUS = np.outer(SX_MINUS_STATE, SX_PLUS_STATE.conj())

ATOM_OPERATORS = {
    'lower': SIGMA_LOWER,
    'raise': SIGMA_RAISE,
    'sigma_x': SIGMA_X,
    'sigma_y': SIGMA_Y,
    'sigma_z': SIGMA_Z,
    'sigma_x_plus': SIGMA_X_PLUS,
    'sigma_x_minus': SIGMA_X_MINUS,
}

NAMED_ATOM_STATES = {
    'ground': np.array([1, 0], dtype=complex),
    'excited': np.array([0, 1], dtype=complex),
    'plus': SX_PLUS_STATE,
    'minus': SX_MINUS_STATE,
}


@dataclass(frozen=True)
class HilbertSpec:
    """Atom (2 levels) tensor num_modes Fock modes truncated at cutoff photons"""
    num_modes: int
    cutoff: int

    @property
    def levels(self):
        return self.cutoff + 1

    @property
    def bath_dim(self):
        return self.levels ** self.num_modes

    @property
    def dim(self):
        return 2 * self.bath_dim

    @property
    def bath_shape(self):
        return (self.levels,) * self.num_modes

    @property
    def strides(self):
        """Flat bath-index increment for one photon in each mode (mode 1 slowest)"""
        return np.array([self.levels ** (self.num_modes - 1 - k) for k in range(self.num_modes)],
                        dtype=np.int64)

    def check_mode(self, mode_k):
        if not 1 <= mode_k <= self.num_modes:
            raise ModeIndexError(f"mode index {mode_k} outside 1..{self.num_modes}")

    def bath_index(self, occupations):
        """Flat bath index of an occupation tuple"""
        occupations = tuple(int(n) for n in occupations)
        if len(occupations) != self.num_modes:
            raise ParameterMismatchError(
                f"expected {self.num_modes} occupation numbers, got {len(occupations)}")
        if any(n < 0 or n > self.cutoff for n in occupations):
            raise ModeIndexError(f"occupations {occupations} outside 0..{self.cutoff}")
        return int(np.ravel_multi_index(occupations, self.bath_shape))

    def flat_index(self, atom, occupations):
        """Composite index of |atom> tensor |n_1..n_kappa>"""
        if atom not in (GROUND, EXCITED):
            raise ModeIndexError(f"atom level {atom} must be 0 (ground) or 1 (excited)")
        return atom * self.bath_dim + self.bath_index(occupations)

    def basis_index(self, flat):
        """Inverse of flat_index"""
        if not 0 <= flat < self.dim:
            raise ModeIndexError(f"flat index {flat} outside 0..{self.dim - 1}")
        atom, bath = divmod(int(flat), self.bath_dim)
        occupations = np.unravel_index(bath, self.bath_shape)
        return BasisIndex(atom=atom, occupations=tuple(int(n) for n in occupations))

    def occupation_table(self):
        """(bath_dim, num_modes) array of occupation numbers in flat bath order"""
        grids = np.indices(self.bath_shape).reshape(self.num_modes, -1)
        return grids.T.copy()


@dataclass(frozen=True)
class BasisIndex:
    atom: int
    occupations: tuple


def build_space(num_modes, cutoff, max_dim=None):
    """Construct the composite space descriptor

    Args:
        num_modes (int): Number of bath modes kappa (>= 1).
        cutoff (int): Maximum photon number per mode (>= 1).
        max_dim (int, optional): Dimension guard. Defaults to MODALJUMP_MAX_DIM.

    Returns:
        HilbertSpec: Space with dim = 2 * (cutoff + 1) ** num_modes.
    """
    if num_modes < 1:
        raise ParameterMismatchError(f"num_modes must be >= 1, got {num_modes}")
    if cutoff < 1:
        raise ParameterMismatchError(f"cutoff must be >= 1, got {cutoff}")
    limit = MAX_DIMENSION if max_dim is None else max_dim
    dim = 2 * (cutoff + 1) ** num_modes
    if dim > limit:
        raise DimensionOverflowError(dim, limit)
    logger.debug(f"Built space with {num_modes} modes, cutoff {cutoff}, dim {dim}")
    return HilbertSpec(num_modes=int(num_modes), cutoff=int(cutoff))


def mode_labels(num_modes):
    """Physical labels of modes 1..kappa, symmetric about zero (kappa=3 gives -1, 0, 1)"""
    return np.arange(num_modes) - num_modes // 2


def label_to_index(num_modes, label):
    """Internal 1-based mode index for a physical label"""
    labels = list(mode_labels(num_modes))
    if label not in labels:
        raise ModeIndexError(f"mode label {label} not among {labels}")
    return labels.index(label) + 1


def dft_matrix(num_modes):
    """Unitary gamma with b_tau = sum_k gamma*_{tau,k} a_k, i.e. entries exp(i 2 pi tau k / kappa)/sqrt(kappa)"""
    labels = mode_labels(num_modes)
    phase = 2j * np.pi * np.outer(labels, labels) / num_modes
    return np.exp(phase) / sqrt(num_modes)


def canonical(op):
    """CSR with summed duplicates, sorted indices and no explicit zeros"""
    op = sp.csr_matrix(op, dtype=complex)
    op.sum_duplicates()
    op.eliminate_zeros()
    op.sort_indices()
    return op


def _ladder(levels):
    """Single-mode truncated annihilator: <n-1|a|n> = sqrt(n)"""
    n = np.arange(1, levels)
    return sp.csr_matrix((np.sqrt(n).astype(complex), (n - 1, n)), shape=(levels, levels))


def bath_annihilation(spec, mode_k):
    """a_k on the bath factor alone (bath_dim x bath_dim)"""
    spec.check_mode(mode_k)
    factors = [sp.identity(spec.levels, dtype=complex, format='csr') for _ in range(spec.num_modes)]
    factors[mode_k - 1] = _ladder(spec.levels)
    op = factors[0]
    for factor in factors[1:]:
        op = sp.kron(op, factor, format='csr')
    return canonical(op)


def embed_atom(spec, atom_matrix):
    """2x2 atom operator padded with the bath identity"""
    return canonical(sp.kron(sp.csr_matrix(atom_matrix), sp.identity(spec.bath_dim, format='csr')))


def embed_bath(spec, bath_op):
    """Bath operator padded with the atom identity"""
    return canonical(sp.kron(sp.identity(2, format='csr'), bath_op))


def annihilation(spec, mode_k):
    """a_k on the composite space"""
    return embed_bath(spec, bath_annihilation(spec, mode_k))


def number_operator(spec, mode_k):
    a = annihilation(spec, mode_k)
    return canonical(a.conj().T @ a)


def excitation_number(spec):
    """sigma^dagger sigma + sum_k n_k"""
    op = embed_atom(spec, SIGMA_RAISE @ SIGMA_LOWER)
    for k in range(1, spec.num_modes + 1):
        op = op + number_operator(spec, k)
    return canonical(op)


def atom_operator(spec, which):
    """Atom operator on the composite space

    Args:
        spec (HilbertSpec): Composite space.
        which (str): One of 'lower', 'raise', 'sigma_x', 'sigma_y', 'sigma_z',
            'sigma_x_plus', 'sigma_x_minus'.

    Returns:
        scipy.sparse.csr_matrix: The padded operator.
    """
    if which not in ATOM_OPERATORS:
        raise ValueError(f"unknown atom operator '{which}', expected one of {sorted(ATOM_OPERATORS)}")
    return embed_atom(spec, ATOM_OPERATORS[which])


def bath_temporal_annihilation(spec, tau):
    """b_tau = (1/sqrt kappa) sum_k a_k exp(-i 2 pi tau k / kappa) on the bath factor"""
    spec.check_mode(tau)
    gamma = dft_matrix(spec.num_modes)
    op = sp.csr_matrix((spec.bath_dim, spec.bath_dim), dtype=complex)
    for k in range(1, spec.num_modes + 1):
        op = op + np.conj(gamma[tau - 1, k - 1]) * bath_annihilation(spec, k)
    return canonical(op)


def temporal_annihilation(spec, tau):
    """b_tau on the composite space, tau an internal index 1..kappa (see mode_labels)"""
    return embed_bath(spec, bath_temporal_annihilation(spec, tau))


def basis_state(spec, atom, occupations=None):
    """|atom> tensor |n_1..n_kappa>, vacuum by default"""
    occupations = (0,) * spec.num_modes if occupations is None else occupations
    psi = np.zeros(spec.dim, dtype=complex)
    psi[spec.flat_index(atom, occupations)] = 1.0
    return psi


def atom_amplitudes(state):
    """2-vector (ground, excited) for a named atom state or explicit amplitudes, normalised"""
    if isinstance(state, str):
        if state not in NAMED_ATOM_STATES:
            raise ValueError(f"unknown atom state '{state}', expected one of {sorted(NAMED_ATOM_STATES)}")
        return NAMED_ATOM_STATES[state].copy()
    amps = np.asarray(state, dtype=complex).reshape(-1)
    if amps.shape != (2,):
        raise ParameterMismatchError(f"atom state needs 2 amplitudes, got {amps.shape[0]}")
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise ParameterMismatchError("atom state amplitudes are all zero")
    return amps / norm


def product_state(spec, atom_state, occupations=None):
    """Atom state tensor a bath Fock state (vacuum by default)"""
    amps = atom_amplitudes(atom_state)
    occupations = (0,) * spec.num_modes if occupations is None else occupations
    bath = spec.bath_index(occupations)
    psi = np.zeros(spec.dim, dtype=complex)
    psi[bath] = amps[GROUND]
    psi[spec.bath_dim + bath] = amps[EXCITED]
    return psi


def temporal_fock_state(spec, atom_state, occupations):
    """Temporal-mode Fock state |{I_tau}> written in the spectral occupation basis

    Built as prod_tau (b_tau^dagger)^I_tau / sqrt(I_tau!) acting on the vacuum;
    exact while sum(occupations) <= cutoff.
    """
    occupations = tuple(int(n) for n in occupations)
    if len(occupations) != spec.num_modes:
        raise ParameterMismatchError(
            f"expected {spec.num_modes} occupation numbers, got {len(occupations)}")
    if sum(occupations) > spec.cutoff:
        raise ParameterMismatchError(
            f"total photon number {sum(occupations)} exceeds cutoff {spec.cutoff}")
    psi = product_state(spec, atom_state)
    for tau, count in enumerate(occupations, start=1):
        if count == 0:
            continue
        b_dag = temporal_annihilation(spec, tau).conj().T
        for _ in range(count):
            psi = b_dag @ psi
        psi = psi / sqrt(factorial(count))
    return psi


def top_level_mask(spec):
    """Boolean mask over composite indices with any mode at the cutoff"""
    bath_mask = (spec.occupation_table() == spec.cutoff).any(axis=1)
    return np.concatenate([bath_mask, bath_mask])
