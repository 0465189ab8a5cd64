"""
Interaction-frame Hamiltonians H_int + V_int(t) for the driven two-level atom.

Every model writes its atom-bath coupling as

    V_int(t) = i * sum_k [ X_k(t) (x) a_k^dagger - X_k(t)^dagger (x) a_k ]

with X_k(t) a 2x2 atom operator. For the spectral model X_k = g_k* e^{i Omega_k t} sigma,
for the temporal model the bath factor counts b_tau photons and X_tau = c_tau(t)* sigma,
and the second-RWA model keeps only the sigma_x-basis components of sigma that are
resonant in the frame rotating with the drive.
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import hilbert
from .config.model_config import APPROXIMATIONS, BASIS_KINDS, get_preset
from .errors import ModeIndexError, ParameterMismatchError

logger = logging.getLogger(__name__)

RESONANCE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Rabi frequency, complex couplings g_k and detunings Omega_k (hbar = 1)"""
    rabi: float
    couplings: tuple
    detunings: tuple

    def __post_init__(self):
        couplings = tuple(complex(g) for g in np.atleast_1d(self.couplings))
        detunings = tuple(float(d) for d in np.atleast_1d(self.detunings))
        if len(couplings) != len(detunings):
            raise ParameterMismatchError(
                f"{len(couplings)} couplings but {len(detunings)} detunings")
        if not couplings:
            raise ParameterMismatchError("at least one bath mode is required")
        if self.rabi < 0:
            raise ParameterMismatchError(f"Rabi frequency must be >= 0, got {self.rabi}")
        object.__setattr__(self, 'rabi', float(self.rabi))
        object.__setattr__(self, 'couplings', couplings)
        object.__setattr__(self, 'detunings', detunings)

    @property
    def num_modes(self):
        return len(self.couplings)

    @property
    def labels(self):
        return hilbert.mode_labels(self.num_modes)

    def index_of_label(self, label):
        return hilbert.label_to_index(self.num_modes, label)

    def as_dict(self):
        return {
            'rabi': self.rabi,
            'couplings': [[g.real, g.imag] for g in self.couplings],
            'detunings': list(self.detunings),
        }

    def digest(self):
        """Stable hash used to key guiding snapshot caches"""
        text = json.dumps(self.as_dict(), sort_keys=True)
        return hashlib.sha256(text.encode('utf-8')).hexdigest()

    @classmethod
    def from_preset(cls, name):
        preset = get_preset(name)
        return cls(rabi=preset['rabi'], couplings=preset['couplings'], detunings=preset['detunings'])


def _check_consistent(spec, params):
    if params.num_modes != spec.num_modes:
        raise ParameterMismatchError(
            f"model has {params.num_modes} modes but the space has {spec.num_modes}")


def temporal_coefficient(params, tau, t):
    """c_tau(t) = (1/sqrt kappa) sum_k g_k exp(-i Omega_k t + i 2 pi tau k / kappa)

    Args:
        params (ModelParams): Couplings and detunings.
        tau (int): Internal temporal-mode index 1..kappa.
        t (float): Time in 1/g.

    Returns:
        complex: The DFT-weighted coupling.
    """
    if not 1 <= tau <= params.num_modes:
        raise ModeIndexError(f"temporal mode index {tau} outside 1..{params.num_modes}")
    return complex(temporal_coefficients(params, t)[tau - 1])


def temporal_coefficients(params, t):
    """All c_tau(t), tau = 1..kappa"""
    gamma = hilbert.dft_matrix(params.num_modes)
    return gamma @ _spectral_coefficients(params, t)


def _spectral_coefficients(params, t):
    """g_k exp(-i Omega_k t)"""
    g = np.asarray(params.couplings, dtype=complex)
    detunings = np.asarray(params.detunings, dtype=float)
    return g * np.exp(-1j * detunings * t)


def _second_rwa_projections(params):
    """Resonant sigma_x-basis component of sigma for each mode

    sigma = (sigma_x + sigma_x^+ - sigma_x^-)/2; in the frame rotating with the drive the
    three terms pick up exp(i Omega_k t), exp(i (Omega_k + Omega) t), exp(i (Omega_k - Omega) t).
    """
    if params.num_modes != 3:
        raise ParameterMismatchError("the second RWA applies to the three-mode model only")
    rabi = params.rabi
    if rabi <= 0:
        raise ParameterMismatchError("the second RWA needs a non-zero Rabi frequency")
    components = {
        0.0: hilbert.SIGMA_X / 2,
        -1.0: hilbert.SIGMA_X_PLUS / 2,
        1.0: -hilbert.SIGMA_X_MINUS / 2,
    }
    projections = []
    for label, detuning in zip(params.labels, params.detunings):
        if abs(detuning - label * rabi) > RESONANCE_TOLERANCE * max(1.0, rabi):
            raise ParameterMismatchError(
                f"second RWA needs detunings (-Omega, 0, Omega), got {params.detunings}")
        projections.append(components[float(label)])
    return np.array(projections)


def _interaction_from_couplings(spec, couplings):
    """V = i sum_k [X_k (x) a_k^dagger - X_k^dagger (x) a_k]"""
    op = sp.csr_matrix((spec.dim, spec.dim), dtype=complex)
    for k in range(1, spec.num_modes + 1):
        lower = hilbert.bath_annihilation(spec, k)
        x = couplings[k - 1]
        op = op + 1j * sp.kron(sp.csr_matrix(x), lower.conj().T)
        op = op - 1j * sp.kron(sp.csr_matrix(x.conj().T), lower)
    return hilbert.canonical(op)


def driving_hamiltonian(spec, rabi):
    """H_int = (Omega/2) sigma_x on the composite space"""
    if rabi < 0:
        raise ParameterMismatchError(f"Rabi frequency must be >= 0, got {rabi}")
    return hilbert.canonical(0.5 * rabi * hilbert.atom_operator(spec, 'sigma_x'))


def spectral_interaction(spec, params, t):
    """V_int(t) = i sum_k [sigma g_k* e^{i Omega_k t} a_k^dagger - sigma^dagger g_k e^{-i Omega_k t} a_k]"""
    _check_consistent(spec, params)
    coefficients = _spectral_coefficients(params, t)
    couplings = np.conj(coefficients)[:, None, None] * hilbert.SIGMA_LOWER
    return _interaction_from_couplings(spec, couplings)


def temporal_interaction(spec, params, t):
    """V_int(t) = i sum_tau [c_tau* sigma b_tau^dagger - c_tau sigma^dagger b_tau] in b-mode occupations"""
    _check_consistent(spec, params)
    coefficients = temporal_coefficients(params, t)
    couplings = np.conj(coefficients)[:, None, None] * hilbert.SIGMA_LOWER
    return _interaction_from_couplings(spec, couplings)


def second_rwa_interaction(spec, params, t):
    """Strong-driving approximation of the three-mode spectral V_int(t)"""
    _check_consistent(spec, params)
    projections = _second_rwa_projections(params)
    coefficients = np.conj(_spectral_coefficients(params, t))
    return _interaction_from_couplings(spec, coefficients[:, None, None] * projections)


@dataclass(frozen=True)
class HamiltonianModel:
    """Time-dependent interaction-frame Hamiltonian on a fixed space"""
    spec: hilbert.HilbertSpec
    params: ModelParams
    basis_kind: str = 'spectral'
    approximation: str = 'exact'
    name: str = field(default='custom', compare=False)

    def __post_init__(self):
        _check_consistent(self.spec, self.params)
        if self.basis_kind not in BASIS_KINDS:
            raise ParameterMismatchError(
                f"basis kind '{self.basis_kind}' not in {BASIS_KINDS}")
        if self.approximation not in APPROXIMATIONS:
            raise ParameterMismatchError(
                f"approximation '{self.approximation}' not in {APPROXIMATIONS}")
        if self.approximation == 'second-rwa':
            if self.basis_kind != 'spectral':
                raise ParameterMismatchError("the second RWA is defined in the spectral basis")
            _second_rwa_projections(self.params)

    @cached_property
    def drive(self):
        """(Omega/2) sigma_x as a 2x2 matrix"""
        return 0.5 * self.params.rabi * hilbert.SIGMA_X

    @cached_property
    def bath_lowering(self):
        return [hilbert.bath_annihilation(self.spec, k) for k in range(1, self.spec.num_modes + 1)]

    @cached_property
    def bath_raising(self):
        return [hilbert.canonical(a.conj().T) for a in self.bath_lowering]

    @cached_property
    def _projections(self):
        if self.approximation == 'second-rwa':
            return _second_rwa_projections(self.params)
        return np.broadcast_to(hilbert.SIGMA_LOWER, (self.spec.num_modes, 2, 2))

    def mode_coefficients(self, t):
        """Per-mode complex coupling: g_k e^{-i Omega_k t} (spectral) or c_tau(t) (temporal)"""
        if self.basis_kind == 'temporal':
            return temporal_coefficients(self.params, t)
        return _spectral_coefficients(self.params, t)

    def couplings(self, t):
        """X_k(t), shape (kappa, 2, 2)"""
        return np.conj(self.mode_coefficients(t))[:, None, None] * self._projections

    def static_hamiltonian(self):
        return driving_hamiltonian(self.spec, self.params.rabi)

    def interaction(self, t):
        """V_int(t) as a sparse matrix"""
        if self.approximation == 'second-rwa':
            return second_rwa_interaction(self.spec, self.params, t)
        if self.basis_kind == 'temporal':
            return temporal_interaction(self.spec, self.params, t)
        return spectral_interaction(self.spec, self.params, t)

    def hamiltonian(self, t):
        """H_int + V_int(t) as a sparse matrix"""
        return hilbert.canonical(self.static_hamiltonian() + self.interaction(t))

    def derivative(self, psi, t):
        """-i (H_int + V_int(t)) psi without assembling the sparse matrix"""
        psi2 = psi.reshape(2, self.spec.bath_dim)
        h_psi = self.drive @ psi2
        couplings = self.couplings(t)
        for k in range(self.spec.num_modes):
            raised = (self.bath_raising[k] @ psi2.T).T
            lowered = (self.bath_lowering[k] @ psi2.T).T
            h_psi = h_psi + 1j * (couplings[k] @ raised) - 1j * (couplings[k].conj().T @ lowered)
        return (-1j * h_psi).reshape(-1)

    def describe(self):
        return {
            'name': self.name,
            'basis': self.basis_kind,
            'approximation': self.approximation,
            'num_modes': self.spec.num_modes,
            'cutoff': self.spec.cutoff,
            **self.params.as_dict(),
        }


def build_model(spec, params, basis_kind='spectral', approximation='exact', name='custom'):
    """Assemble a HamiltonianModel after checking params against the space"""
    model = HamiltonianModel(spec=spec, params=params, basis_kind=basis_kind,
                             approximation=approximation, name=name)
    logger.debug(f"Built {basis_kind} model '{name}' ({approximation}) on dim {spec.dim}")
    return model


def model_from_preset(name, cutoff=None, approximation='exact'):
    """Model for one of the named presets, optionally with a different Fock cutoff"""
    preset = get_preset(name)
    spec = hilbert.build_space(preset['num_modes'], cutoff or preset['cutoff'])
    params = ModelParams.from_preset(name)
    return build_model(spec, params, basis_kind=preset['basis'], approximation=approximation, name=name)


def drive_frame(model, t):
    """exp(-i H_int t) on the composite space, for moving into the frame with the drive removed"""
    angle = 0.5 * model.params.rabi * t
    u = np.cos(angle) * np.eye(2) - 1j * np.sin(angle) * hilbert.SIGMA_X
    return hilbert.embed_atom(model.spec, u)
