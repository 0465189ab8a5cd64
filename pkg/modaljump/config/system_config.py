"""
Numerical limits, tolerances and resource settings for the simulator
"""
import os
from pathlib import Path

# Load environment variables from .env file if it exists
env_path = Path(__file__).resolve().parent.parent.parent / '.env'
if env_path.exists():
    from dotenv import load_dotenv
    load_dotenv(dotenv_path=str(env_path))

# Hilbert space guard: build_space refuses anything larger
MAX_DIMENSION = int(os.environ.get('MODALJUMP_MAX_DIM', str(2 ** 24)))

# Guiding state storage
SNAPSHOT_LIMIT = int(os.environ.get('MODALJUMP_SNAPSHOT_LIMIT', str(2 ** 24)))  # complex numbers
DEFAULT_DT = float(os.environ.get('MODALJUMP_DT', '1e-3'))  # in units of 1/g
NORM_TOLERANCE = 1e-6

# Leakage into the top Fock level of any mode
LEAKAGE_TOLERANCE = float(os.environ.get('MODALJUMP_LEAKAGE_TOLERANCE', '1e-4'))
LEAKAGE_HARD_LIMIT = float(os.environ.get('MODALJUMP_LEAKAGE_HARD_LIMIT', '1e-1'))

# Jump sampling
P_MAX = float(os.environ.get('MODALJUMP_P_MAX', '0.1'))
PROBABILITY_FLOOR = float(os.environ.get('MODALJUMP_PROBABILITY_FLOOR', '1e-12'))

# Ensemble execution
DEFAULT_THREADS = int(os.environ.get('MODALJUMP_THREADS', '0')) or (os.cpu_count() or 1)
BATCH_SIZE = int(os.environ.get('MODALJUMP_BATCH_SIZE', '64'))
BLOCK_STEPS = 512  # guiding frames handed to the jump engine at a time

# Output
OUTPUT_DIR = os.environ.get('MODALJUMP_OUTPUT_DIR', '')


def snapshot_stride(dim, steps, limit=None):
    """Stride between stored guiding frames for a run

    Args:
        dim (int): Composite Hilbert space dimension.
        steps (int): Number of integrator steps.
        limit (int, optional): Storage budget in complex numbers. Defaults to SNAPSHOT_LIMIT.

    Returns:
        int: 1 when every frame fits, otherwise the smallest stride that fits.
    """
    limit = SNAPSHOT_LIMIT if limit is None else limit
    frames = steps + 1
    if dim * frames <= limit:
        return 1
    stored = max(limit // dim, 2)
    return -(-frames // (stored - 1))


def resolve_threads(threads=None):
    """Number of worker threads for ensemble batches"""
    if threads is None or threads <= 0:
        return DEFAULT_THREADS
    return threads


def resolve_output_dir(cli_value=None, config_value=None):
    """Pick the output directory: CLI flag, then MODALJUMP_OUTPUT_DIR, then config file"""
    if cli_value:
        return Path(cli_value)
    env_value = os.environ.get('MODALJUMP_OUTPUT_DIR', OUTPUT_DIR)
    if env_value:
        return Path(env_value)
    if config_value:
        return Path(config_value)
    return Path('output')
