"""
Guiding state integration: d_t |Psi> = -i [H_int + V_int(t)] |Psi> on a fixed grid.

The guiding state never sees the hidden-variable jumps, so one integration per
parameter set serves every trajectory of an ensemble.
"""
import json
import logging
import time
from dataclasses import dataclass

import numpy as np

from . import hilbert
from .config.system_config import (DEFAULT_DT, LEAKAGE_TOLERANCE, NORM_TOLERANCE,
                                   snapshot_stride)
from .errors import GridMismatchError, NumericalError, ParameterMismatchError, SnapshotCacheError

logger = logging.getLogger(__name__)

CACHE_VERSION = 1


@dataclass(frozen=True)
class TimeGrid:
    """t_j = t0 + j * dt for j = 0..steps"""
    dt: float = DEFAULT_DT
    steps: int = 1
    t0: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise GridMismatchError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise GridMismatchError(f"steps must be >= 1, got {self.steps}")

    @classmethod
    def spanning(cls, t_final, dt=DEFAULT_DT, t0=0.0):
        """Grid from t0 to t_final (rounded to a whole number of steps)"""
        steps = int(round((t_final - t0) / dt))
        return cls(dt=float(dt), steps=max(steps, 1), t0=float(t0))

    @property
    def size(self):
        return self.steps + 1

    @property
    def t_final(self):
        return self.time(self.steps)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.size)

    def time(self, j):
        return self.t0 + j * self.dt

    def index_of(self, t):
        """Nearest grid index to time t; raises if t lies outside the grid"""
        j = int(round((t - self.t0) / self.dt))
        if j < 0 or j > self.steps:
            raise GridMismatchError(
                f"time {t} outside grid [{self.t0}, {self.t_final}] with dt={self.dt}")
        return j

    def as_dict(self):
        return {'t0': self.t0, 'dt': self.dt, 'steps': self.steps}


def rk4_step(state, model, t, dt):
    """One classical Runge-Kutta step of the Schrodinger equation (no renormalisation)

    Args:
        state (np.ndarray): Amplitudes at time t.
        model (HamiltonianModel): Generator.
        t (float): Current time.
        dt (float): Step size.

    Returns:
        np.ndarray: Amplitudes at t + dt.
    """
    k1 = model.derivative(state, t)
    k2 = model.derivative(state + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = model.derivative(state + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = model.derivative(state + dt * k3, t + dt)
    new_state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(new_state)):
        raise NumericalError("non-finite amplitude in guiding state", t=t)
    return new_state


class GuidingTrajectory:
    """Guiding state snapshots on a grid, read-only once built

    Frames are stored every `stride` grid points; intermediate states are
    re-integrated on demand from the nearest stored frame with the same
    steps, so they are bitwise identical to the original integration.
    The leakage series is the running maximum of the top-Fock-level mass.
    """

    def __init__(self, model, grid, frames, stride, leakage, norms, leakage_tolerance):
        self.model = model
        self.spec = model.spec
        self.grid = grid
        self.stride = stride
        self._frames = frames
        self._frames.setflags(write=False)
        self.leakage = leakage
        self.norms = norms
        self.leakage_tolerance = leakage_tolerance

    @property
    def times(self):
        return self.grid.times

    @property
    def peak_leakage(self):
        return float(self.leakage.max())

    @property
    def leakage_flag(self):
        return self.peak_leakage > self.leakage_tolerance

    @property
    def max_norm_error(self):
        return float(np.max(np.abs(self.norms - 1.0)))

    @property
    def final_state(self):
        return self.state(self.grid.steps)

    def state(self, j):
        """Guiding state at grid index j"""
        if not 0 <= j <= self.grid.steps:
            raise GridMismatchError(f"grid index {j} outside 0..{self.grid.steps}")
        slot = j // self.stride
        state = self._frames[slot]
        for i in range(slot * self.stride, j):
            state = rk4_step(state, self.model, self.grid.time(i), self.grid.dt)
        return state

    def state_at(self, t):
        return self.state(self.grid.index_of(t))

    def iter_blocks(self, block_steps):
        """Yield (j0, states) with states[i] the guiding state at grid index j0 + i"""
        if self.stride == 1:
            for j0 in range(0, self.grid.size, block_steps):
                yield j0, self._frames[j0:j0 + block_steps]
            return
        state = self._frames[0]
        block = []
        j0 = 0
        for j in range(self.grid.size):
            if j % self.stride == 0:
                state = self._frames[j // self.stride]
            block.append(state)
            if len(block) == block_steps:
                yield j0, np.array(block)
                j0, block = j + 1, []
            if j < self.grid.steps:
                state = rk4_step(state, self.model, self.grid.time(j), self.grid.dt)
        if block:
            yield j0, np.array(block)

    def iter_states(self):
        for j0, states in self.iter_blocks(256):
            for i, state in enumerate(states):
                yield j0 + i, state


def evolve(initial_state, model, grid, leakage_tolerance=LEAKAGE_TOLERANCE, snapshot_limit=None):
    """Integrate the guiding state over the grid

    Args:
        initial_state (np.ndarray): Normalised amplitudes at grid.t0.
        model (HamiltonianModel): Generator.
        grid (TimeGrid): Fixed time grid.
        leakage_tolerance (float, optional): Top-Fock-level probability that flags the run.
        snapshot_limit (int, optional): Storage budget in complex numbers.

    Returns:
        GuidingTrajectory: Snapshots, norm series and the non-decreasing leakage series.
    """
    state = np.asarray(initial_state, dtype=complex).copy()
    if state.shape != (model.spec.dim,):
        raise ParameterMismatchError(
            f"initial state has length {state.shape[0]}, model space has dim {model.spec.dim}")
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise ParameterMismatchError(f"initial state is not normalised (norm {norm})")

    stride = snapshot_stride(model.spec.dim, grid.steps, snapshot_limit)
    frames = np.empty((grid.steps // stride + 1, model.spec.dim), dtype=complex)
    mask = hilbert.top_level_mask(model.spec)
    leakage = np.empty(grid.size)
    norms = np.empty(grid.size)

    logger.info(f"Integrating guiding state: dim {model.spec.dim}, {grid.steps} steps of {grid.dt}"
                f"{'' if stride == 1 else f', storing every {stride}th frame'}")
    started = time.time()
    flagged = False
    for j in range(grid.size):
        probabilities = np.abs(state) ** 2
        top_level = probabilities[mask].sum()
        leakage[j] = top_level if j == 0 else max(top_level, leakage[j - 1])
        norms[j] = np.sqrt(probabilities.sum())
        if j % stride == 0:
            frames[j // stride] = state
        if leakage[j] > leakage_tolerance and not flagged:
            flagged = True
            logger.warning(f"Fock-space leakage {leakage[j]:.3g} exceeds tolerance "
                           f"{leakage_tolerance:.3g} at t={grid.time(j):.6g}; raise the cutoff")
        if j < grid.steps:
            state = rk4_step(state, model, grid.time(j), grid.dt)

    guiding = GuidingTrajectory(model, grid, frames, stride, leakage, norms, leakage_tolerance)
    logger.info(f"Guiding state done in {time.time() - started:.2f}s; peak leakage "
                f"{guiding.peak_leakage:.3g}, max norm error {guiding.max_norm_error:.3g}")
    return guiding


def _cache_header(model, grid, stride):
    return {
        'version': CACHE_VERSION,
        'num_modes': model.spec.num_modes,
        'cutoff': model.spec.cutoff,
        'basis': model.basis_kind,
        'approximation': model.approximation,
        'params': model.params.digest(),
        'grid': grid.as_dict(),
        'stride': stride,
    }


def save_guiding(path, guiding):
    """Write the snapshot cache (npz with a JSON header)"""
    header = _cache_header(guiding.model, guiding.grid, guiding.stride)
    header['leakage_tolerance'] = guiding.leakage_tolerance
    np.savez(path, header=np.array(json.dumps(header, sort_keys=True)),
             frames=guiding._frames, leakage=guiding.leakage, norms=guiding.norms)
    logger.info(f"Guiding snapshots cached to {path}")


def load_guiding(path, model, grid):
    """Read a snapshot cache written for the same model and grid"""
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data['header']))
            frames = data['frames']
            leakage = data['leakage']
            norms = data['norms']
    except (OSError, KeyError, ValueError) as e:
        raise SnapshotCacheError(f"cannot read snapshot cache {path}: {e}") from e
    expected = _cache_header(model, grid, header.get('stride'))
    for key, value in expected.items():
        if header.get(key) != value:
            raise SnapshotCacheError(
                f"snapshot cache {path} was written for another run ({key}: {header.get(key)!r} != {value!r})")
    return GuidingTrajectory(model, grid, frames, header['stride'], leakage, norms,
                             header['leakage_tolerance'])
