"""
modal-jumps: Bell-type jump unravelings of a driven two-level atom coupled
to a discrete bosonic bath, in spectral and temporal mode bases.
"""

__version__ = "1.0.0"

from .errors import ModalJumpError
from .hilbert import HilbertSpec, build_space
from .models import HamiltonianModel, ModelParams, build_model, model_from_preset
from .guiding import GuidingTrajectory, TimeGrid, evolve
from .beable import PreferredMeasure, RateTable, bell_rates, born_probability, current
from .unravel import (Ensemble, Trajectory, run_ensemble, run_trajectory, spectral_measure,
                      temporal_measure)
from .analysis import bloch_of, ensemble_vs_exact, markovian_limit_profile, reduced_state

__all__ = [
    'ModalJumpError',
    'HilbertSpec', 'build_space',
    'HamiltonianModel', 'ModelParams', 'build_model', 'model_from_preset',
    'GuidingTrajectory', 'TimeGrid', 'evolve',
    'PreferredMeasure', 'RateTable', 'bell_rates', 'born_probability', 'current',
    'Ensemble', 'Trajectory', 'run_ensemble', 'run_trajectory', 'spectral_measure', 'temporal_measure',
    'bloch_of', 'ensemble_vs_exact', 'markovian_limit_profile', 'reduced_state',
]
