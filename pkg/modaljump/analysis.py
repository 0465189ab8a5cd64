"""
Exact reference quantities and ensemble comparisons.

Bloch components follow the atom operators of hilbert: x = <sigma_x>,
y = <sigma_y>, z = <sigma_z> = P(excited) - P(ground).
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from . import hilbert
from .beable import PreferredMeasure, born_distribution
from .errors import GridMismatchError, ParameterMismatchError

logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class ReducedState:
    """2x2 reduced density matrix of the atom in (ground, excited) order"""
    matrix: np.ndarray

    @property
    def trace(self):
        return complex(np.trace(self.matrix))

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)

    def is_hermitian(self, tolerance=HERMITIAN_TOLERANCE):
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=tolerance, rtol=0))

    def population(self, level):
        return float(self.matrix[level, level].real)


def reduced_state(state, spec):
    """rho = Tr_env |Psi><Psi|

    Args:
        state (np.ndarray): Normalised composite amplitudes.
        spec (HilbertSpec): Composite space.

    Returns:
        ReducedState: rho[a, b] = sum over bath configs Psi[a, cfg] conj(Psi[b, cfg]).
    """
    psi2 = np.asarray(state).reshape(2, spec.bath_dim)
    return ReducedState(matrix=psi2 @ psi2.conj().T)


def bloch_vectors(amplitudes):
    """Bloch vectors of the normalised versions of (..., 2) amplitude pairs; zero where the pair vanishes"""
    amplitudes = np.asarray(amplitudes)
    ground = amplitudes[..., hilbert.GROUND]
    excited = amplitudes[..., hilbert.EXCITED]
    p_ground = np.abs(ground) ** 2
    p_excited = np.abs(excited) ** 2
    weight = p_ground + p_excited
    safe = np.where(weight > 0, weight, 1.0)
    cross = np.conj(ground) * excited
    return np.stack([2.0 * cross.real / safe, -2.0 * cross.imag / safe,
                     (p_excited - p_ground) / safe], axis=-1)


def bloch_of(state):
    """(x, y, z) of a ReducedState, a 2x2 density matrix or a pure 2-vector"""
    if isinstance(state, ReducedState):
        state = state.matrix
    state = np.asarray(state)
    if state.shape == (2,):
        return tuple(float(v) for v in bloch_vectors(state))
    if state.shape != (2, 2):
        raise ParameterMismatchError(f"expected a 2-vector or a 2x2 matrix, got shape {state.shape}")
    return tuple(float(np.trace(state @ op).real)
                 for op in (hilbert.SIGMA_X, hilbert.SIGMA_Y, hilbert.SIGMA_Z))


def density_from_bloch(vector):
    x, y, z = vector
    return 0.5 * (np.eye(2) + x * hilbert.SIGMA_X + y * hilbert.SIGMA_Y + z * hilbert.SIGMA_Z)


def trace_distance(a, b):
    """Half the trace norm of a - b, for Bloch vectors or 2x2 matrices"""
    a = a.matrix if isinstance(a, ReducedState) else np.asarray(a)
    b = b.matrix if isinstance(b, ReducedState) else np.asarray(b)
    if a.shape[-2:] == (2, 2) and b.shape[-2:] == (2, 2):
        return 0.5 * np.abs(np.linalg.eigvalsh(a - b)).sum(axis=-1)
    return 0.5 * np.linalg.norm(a - b, axis=-1)


def exact_bloch_series(guiding):
    """Bloch vector of the partial-trace reduced state at every grid point"""
    series = np.empty((guiding.grid.size, 3))
    for j, state in guiding.iter_states():
        series[j] = bloch_of(reduced_state(state, guiding.spec))
    return series


def conditioned_moments(state, measure):
    """Born-weighted mean and second moment of the conditioned Bloch vectors"""
    slices = measure.slices(state)
    weights = born_distribution(state, measure)
    vectors = bloch_vectors(slices)
    mean = weights @ vectors
    second = weights @ (vectors ** 2)
    return mean, second


def reference_series(guiding, measure):
    """Exact Bloch vectors and the Born-weighted variance of the conditioned ones, in one pass

    Args:
        guiding (GuidingTrajectory): Guiding snapshots.
        measure (PreferredMeasure): Unravelling basis.

    Returns:
        tuple: (grid.size, 3) exact Bloch series and (grid.size, 3) per-component variance; the
            variance over N gives the squared standard error an N-member ensemble should show.
    """
    exact = np.empty((guiding.grid.size, 3))
    variance = np.empty((guiding.grid.size, 3))
    for j, state in guiding.iter_states():
        exact[j] = bloch_of(reduced_state(state, guiding.spec))
        mean, second = conditioned_moments(state, measure)
        variance[j] = np.maximum(second - mean ** 2, 0.0)
    return exact, variance


@dataclass
class DifferenceSeries:
    """Ensemble mean minus exact Bloch vector, with the standard-error band used to judge it"""
    times: np.ndarray
    mean: np.ndarray
    exact: np.ndarray
    standard_error: np.ndarray
    band_error: np.ndarray
    trace_distance: np.ndarray

    @property
    def difference(self):
        return self.mean - self.exact

    def within_band(self, sigmas=3.0):
        """(T, 3) mask of components inside sigmas * band_error"""
        return np.abs(self.difference) <= sigmas * self.band_error + HERMITIAN_TOLERANCE

    def fraction_within(self, sigmas=3.0):
        """Per-component fraction of grid points inside the band"""
        return self.within_band(sigmas).mean(axis=0)

    def passes(self, sigmas=3.0, fraction=0.99):
        return bool(np.all(self.fraction_within(sigmas) >= fraction))


def ensemble_vs_exact(ensemble, guiding, measure=None):
    """Compare an ensemble mean with the exact reduced state on the same grid

    The band is the larger of the empirical standard error and the one implied by
    the Born weights, so early times where no member has jumped yet are not judged
    against a zero-width band.
    """
    if ensemble.grid != guiding.grid:
        raise GridMismatchError(f"ensemble grid {ensemble.grid} differs from guiding grid {guiding.grid}")
    if measure is None:
        measure = PreferredMeasure(kind=guiding.model.basis_kind, spec=guiding.spec)
    exact, variance = reference_series(guiding, measure)
    implied = np.sqrt(variance / ensemble.n_trajectories)
    distance = trace_distance(ensemble.mean_bloch, exact)
    return DifferenceSeries(times=guiding.times, mean=ensemble.mean_bloch, exact=exact,
                            standard_error=ensemble.standard_error,
                            band_error=np.maximum(ensemble.standard_error, implied),
                            trace_distance=distance)


def markovian_limit_profile(kappa, g_flat, omega_spacing, tau, tgrid):
    """Closed-form c_tau(t) for flat couplings and equally spaced detunings

    c_tau(t) = (g / sqrt kappa) {1 + 2 sum_{k=1}^{(kappa-1)/2} cos[k (Omega t - 2 pi tau / kappa)]}

    Args:
        kappa (int): Odd number of modes.
        g_flat (float): Common coupling g.
        omega_spacing (float): Detuning spacing Omega.
        tau (int): Temporal-mode label.
        tgrid (array-like): Times.

    Returns:
        np.ndarray: c_tau on tgrid (real).
    """
    if kappa < 1 or kappa % 2 == 0:
        raise ValueError(f"closed-form profile needs an odd number of modes, got {kappa}")
    t = np.asarray(tgrid, dtype=float)
    phase = omega_spacing * t - 2.0 * np.pi * tau / kappa
    k = np.arange(1, (kappa - 1) // 2 + 1)
    total = 1.0 + 2.0 * np.cos(np.multiply.outer(phase, k)).sum(axis=-1)
    return g_flat / np.sqrt(kappa) * total


def peak_times(values, times, height=None):
    """Times of the local maxima of a sampled series, optionally only those reaching height"""
    values = np.asarray(values, dtype=float)
    peaks, _ = find_peaks(values, height=height)
    return np.asarray(times)[peaks]


def peak_to_mean_ratio(values):
    values = np.asarray(values, dtype=float)
    return float(values.max() / values.mean())


def config_histogram(ensemble, guiding, step, measure=None):
    """Empirical config frequencies at a sampled grid index against the Born weights

    Returns:
        tuple: (frequencies, born probabilities, binomial standard errors), each over bath configs.
    """
    if step not in ensemble.histograms:
        raise GridMismatchError(f"grid index {step} was not sampled; pass it in sample_steps")
    if measure is None:
        measure = PreferredMeasure(kind=guiding.model.basis_kind, spec=guiding.spec)
    born = born_distribution(guiding.state(step), measure)
    frequencies = ensemble.histograms[step] / ensemble.n_trajectories
    errors = np.sqrt(born * (1.0 - born) / ensemble.n_trajectories)
    return frequencies, born, errors
