"""
Physical presets and default parameters for the driven two-level atom models
"""
import os
from pathlib import Path

# Load environment variables from .env file if it exists
env_path = Path(__file__).resolve().parent.parent.parent / '.env'
if env_path.exists():
    from dotenv import load_dotenv
    load_dotenv(dotenv_path=str(env_path))

# Units: hbar = 1, times in 1/g with g the reference coupling
DEFAULT_PRESET = os.environ.get('MODALJUMP_PRESET', 'single-mode')
DEFAULT_SEED = int(os.environ.get('MODALJUMP_SEED', '20040101'))
DEFAULT_TRAJECTORIES = int(os.environ.get('MODALJUMP_TRAJECTORIES', '1000'))

BASIS_KINDS = ('spectral', 'temporal')
APPROXIMATIONS = ('exact', 'second-rwa')
INITIAL_STATES = ('ground', 'excited', 'plus', 'minus')


def sideband_detunings(rabi, num_modes=3):
    """Equally spaced detunings k * Omega for symmetric labels k (three modes: -Omega, 0, Omega)"""
    half = num_modes // 2
    return tuple(float((k - half) * rabi) for k in range(num_modes))


# Presets reproduce the three scenarios: one resonant mode, and three modes at
# w0 - Omega, w0, w0 + Omega unravelled in spectral or temporal modes.
# Cutoffs keep top-level leakage under LEAKAGE_TOLERANCE up to t_final: the resonant
# mode is displaced to about (g t / 2)^2 photons, shared over three temporal modes.
PRESETS = {
    'single-mode': {
        'num_modes': 1,
        'couplings': (1.0,),
        'detunings': (0.0,),
        'rabi': 5.0,
        'basis': 'spectral',
        'initial': 'ground',
        'cutoff': 60,
        't_final': 20.0,
    },
    'three-mode-spectral': {
        'num_modes': 3,
        'couplings': (1.0, 1.0, 1.0),
        'detunings': sideband_detunings(20.0),
        'rabi': 20.0,
        'basis': 'spectral',
        'initial': 'plus',
        'cutoff': 46,
        't_final': 10.0,
    },
    'three-mode-temporal': {
        'num_modes': 3,
        'couplings': (1.0, 1.0, 1.0),
        'detunings': sideband_detunings(20.0),
        'rabi': 20.0,
        'basis': 'temporal',
        'initial': 'ground',
        'cutoff': 24,
        't_final': 10.0,
    },
}

# Model fields a preset pins; explicit values for these must agree with the preset
PRESET_MODEL_FIELDS = ('num_modes', 'couplings', 'detunings', 'rabi', 'basis')


def get_preset(name):
    """Look up a preset by name

    Args:
        name (str): One of PRESETS.

    Returns:
        dict: A copy of the preset parameters.
    """
    if name not in PRESETS:
        raise ValueError(f"unknown preset '{name}', expected one of {sorted(PRESETS)}")
    return dict(PRESETS[name])
