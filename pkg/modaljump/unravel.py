"""
Trajectory and ensemble runners for the spectral-mode and temporal-mode unravelings.

All trajectories of a batch advance together over blocks of guiding frames, so
a step costs a handful of array operations whatever the batch size. Batches
have a fixed membership (BATCH_SIZE consecutive trajectory ids) and their
moments are merged in id order, which keeps ensemble aggregates independent of
the thread count.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import beable
from .analysis import bloch_vectors
from .config.system_config import BATCH_SIZE, BLOCK_STEPS, P_MAX, PROBABILITY_FLOOR, resolve_threads
from .errors import ParameterMismatchError, StepSizeError

logger = logging.getLogger(__name__)


def spectral_measure(spec):
    """Photon numbers of the frequency modes a_k"""
    return beable.PreferredMeasure(kind='spectral', spec=spec)


def temporal_measure(spec, model=None):
    """Photon numbers I_tau of the temporal modes b_tau

    The model (when given) must be built in the temporal-mode basis, so that its
    bath factor already counts b_tau photons.
    """
    if model is not None and model.basis_kind != 'temporal':
        raise ParameterMismatchError(
            "the temporal measure needs a model built in the temporal-mode basis")
    return beable.PreferredMeasure(kind='temporal', spec=spec)


def measure_for(model):
    """The preferred measure matching the model's basis"""
    if model.basis_kind == 'temporal':
        return temporal_measure(model.spec, model)
    return spectral_measure(model.spec)


def trajectory_seed(master_seed, index):
    """Seed of ensemble member `index`, independent of execution order"""
    return np.random.SeedSequence(master_seed, spawn_key=(index,))


def trajectory_rng(seed):
    """Counter-based Philox stream owned by one trajectory"""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def describe_seed(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {'entropy': seed.entropy, 'spawn_key': list(seed.spawn_key)}
    return {'entropy': seed, 'spawn_key': []}


@dataclass
class Trajectory:
    """One hidden-variable history with its conditioned-state Bloch vectors

    Row j of every series belongs to grid time t_j. A jump sampled over
    [t_j, t_j+1] shows up as a config change at row j + 1.
    """
    grid: object
    configs: np.ndarray
    bloch: np.ndarray
    probabilities: np.ndarray
    seed: object = None
    clamp_events: int = 0
    overflow_steps: int = 0
    leakage_flag: bool = False

    @property
    def times(self):
        return self.grid.times

    @property
    def jump_flags(self):
        changed = np.any(self.configs[1:] != self.configs[:-1], axis=1)
        return np.concatenate([[False], changed])

    @property
    def num_jumps(self):
        return int(self.jump_flags.sum())

    @property
    def jumps(self):
        """(t, from, to) for every jump"""
        steps = np.flatnonzero(self.jump_flags)
        return [(self.grid.time(j), tuple(int(n) for n in self.configs[j - 1]),
                 tuple(int(n) for n in self.configs[j])) for j in steps]

    def diagnostics(self):
        return {
            'jumps': self.num_jumps,
            'clamp_events': self.clamp_events,
            'overflow_steps': self.overflow_steps,
            'leakage_flag': self.leakage_flag,
            'seed': describe_seed(self.seed),
        }


@dataclass
class Ensemble:
    """Per-time mean Bloch vector and standard error over N trajectories"""
    grid: object
    n_trajectories: int
    master_seed: int
    mean_bloch: np.ndarray
    standard_error: np.ndarray
    batch_size: int = BATCH_SIZE
    members: list = None
    histograms: dict = field(default_factory=dict)
    clamp_events: int = 0
    overflow_steps: int = 0
    jumps_up: int = 0
    jumps_down: int = 0
    leakage_flag: bool = False

    @property
    def times(self):
        return self.grid.times

    def diagnostics(self):
        return {
            'trajectories': self.n_trajectories,
            'master_seed': self.master_seed,
            'batch_size': self.batch_size,
            'jumps_up': self.jumps_up,
            'jumps_down': self.jumps_down,
            'clamp_events': self.clamp_events,
            'overflow_steps': self.overflow_steps,
            'leakage_flag': self.leakage_flag,
        }


@dataclass
class BatchResult:
    """Per-time moments from one batch, plus full member series when kept

    means and m2 hold the batch mean of the Bloch vectors and the summed squared
    deviations from it, so batches merge without cancellation.
    """
    seeds: list
    means: np.ndarray
    m2: np.ndarray
    histograms: dict
    clamp_events: np.ndarray
    overflow_steps: np.ndarray
    jumps_up: int = 0
    jumps_down: int = 0
    member_configs: np.ndarray = None
    member_bloch: np.ndarray = None
    member_probabilities: np.ndarray = None

    @property
    def count(self):
        return len(self.seeds)

    def members(self, grid, leakage_flag=False):
        if self.member_configs is None:
            return []
        return [Trajectory(grid=grid, configs=self.member_configs[m], bloch=self.member_bloch[m],
                           probabilities=self.member_probabilities[m], seed=seed,
                           clamp_events=int(self.clamp_events[m]),
                           overflow_steps=int(self.overflow_steps[m]), leakage_flag=leakage_flag)
                for m, seed in enumerate(self.seeds)]


def merge_moments(count_a, mean_a, m2_a, count_b, mean_b, m2_b):
    """Pairwise update of (count, mean, M2) for two disjoint groups"""
    count = count_a + count_b
    delta = mean_b - mean_a
    mean = mean_a + delta * (count_b / count)
    m2 = m2_a + m2_b + delta ** 2 * (count_a * count_b / count)
    return count, mean, m2


def _initial_indices(guiding, measure, rngs):
    """Bath index of each trajectory's starting config, drawn from the Born weights at t0"""
    cdf = np.cumsum(beable.born_distribution(guiding.state(0), measure))
    first = np.array([rng.random() for rng in rngs])
    index = np.searchsorted(cdf, first * cdf[-1], side='right')
    return np.minimum(index, len(cdf) - 1)


class BatchRunner:
    """Hidden-variable configs of one batch, advanced block by block over guiding frames

    Each trajectory draws the uniforms of a block from its own stream, so the
    outcome does not depend on how the grid is split into blocks.
    """

    def __init__(self, model, measure, guiding, seeds, keep_members=False, sample_steps=(),
                 p_max=P_MAX, floor=PROBABILITY_FLOOR):
        beable.check_measure(model, measure)
        if guiding.model != model:
            raise ParameterMismatchError("guiding state was integrated with a different model")
        self.model = model
        self.measure = measure
        self.grid = guiding.grid
        self.keep_members = keep_members
        self.sample_steps = set(sample_steps)
        self.p_max = p_max
        self.floor = floor

        spec = measure.spec
        self.strides = np.asarray(spec.strides)
        self.rngs = [trajectory_rng(seed) for seed in seeds]
        self.index = _initial_indices(guiding, measure, self.rngs)
        self.configs = spec.occupation_table()[self.index].copy()

        size = len(seeds)
        steps = self.grid.size
        self.result = BatchResult(seeds=list(seeds), means=np.zeros((steps, 3)), m2=np.zeros((steps, 3)),
                                  histograms={}, clamp_events=np.zeros(size, dtype=int),
                                  overflow_steps=np.zeros(size, dtype=int))
        if keep_members:
            self.result.member_configs = np.empty((size, steps, spec.num_modes), dtype=np.int32)
            self.result.member_bloch = np.empty((size, steps, 3))
            self.result.member_probabilities = np.empty((size, steps))

    def advance(self, j0, states):
        """Record grid points j0.. and sample the jumps leaving each of them"""
        grid = self.grid
        result = self.result
        size = len(self.rngs)
        steps_here = max(min(len(states), grid.steps - j0), 0)
        uniforms = np.array([rng.random(steps_here) for rng in self.rngs]).reshape(size, steps_here)
        for i, state in enumerate(states):
            j = j0 + i
            t = grid.time(j)
            slices = self.measure.slices(state)
            own = slices[self.index]
            probabilities = np.sum(np.abs(own) ** 2, axis=1)
            bloch = bloch_vectors(own)
            result.means[j] = bloch.mean(axis=0)
            result.m2[j] = ((bloch - result.means[j]) ** 2).sum(axis=0)
            if self.keep_members:
                result.member_configs[:, j] = self.configs
                result.member_bloch[:, j] = bloch
                result.member_probabilities[:, j] = probabilities
            if j in self.sample_steps:
                result.histograms[j] = np.bincount(self.index, minlength=self.measure.spec.bath_dim)
            if j == grid.steps:
                break

            currents = beable.neighbour_currents(slices, self.model.couplings(t), self.configs,
                                                 self.measure.spec)
            rates, clamped = beable.rates_from_currents(currents, probabilities, grid.dt,
                                                        self.floor, self.p_max)
            columns, total = beable.select_jumps(uniforms[:, i], rates, grid.dt)
            if total.max() > 1.0:
                raise StepSizeError(t, float(total.max()))
            result.clamp_events += clamped
            result.overflow_steps += total > self.p_max

            jumped = np.flatnonzero(columns >= 0)
            if jumped.size:
                modes = columns[jumped] // 2
                delta = np.where(columns[jumped] % 2 == 0, 1, -1)
                self.configs[jumped, modes] += delta
                self.index[jumped] += delta * self.strides[modes]
                result.jumps_up += int((delta > 0).sum())
                result.jumps_down += int((delta < 0).sum())


def run_batch(model, measure, guiding, seeds, keep_members=False, sample_steps=(),
              p_max=P_MAX, floor=PROBABILITY_FLOOR, block_steps=BLOCK_STEPS):
    """Advance a batch of trajectories together over the shared guiding state

    Args:
        model (HamiltonianModel): Model the guiding state was integrated with.
        measure (PreferredMeasure): Unravelling basis.
        guiding (GuidingTrajectory): Shared, read-only guiding snapshots.
        seeds (list): One seed (int or SeedSequence) per trajectory.
        keep_members (bool, optional): Keep full per-trajectory series.
        sample_steps (iterable, optional): Grid indices at which to histogram configs.
        p_max (float, optional): Per-step jump probability above which a step is counted as oversized.
        floor (float, optional): Probability floor for the rate clamp.

    Returns:
        BatchResult: Mean and summed squared deviations of the Bloch vectors per grid point.
    """
    runner = BatchRunner(model, measure, guiding, seeds, keep_members=keep_members,
                         sample_steps=sample_steps, p_max=p_max, floor=floor)
    for j0, states in guiding.iter_blocks(block_steps):
        runner.advance(j0, states)
    return runner.result


def _log_diagnostics(label, clamp_events, overflow_steps, p_max):
    if clamp_events:
        logger.warning(f"{label}: rates clamped at the probability floor in {clamp_events} steps")
    if overflow_steps:
        logger.warning(f"{label}: jump probability above {p_max} in {overflow_steps} steps; "
                       f"consider a smaller dt")


def run_trajectory(model, measure, guiding, seed, p_max=P_MAX, floor=PROBABILITY_FLOOR):
    """Simulate one hidden-variable trajectory and its conditioned states

    Args:
        model (HamiltonianModel): Model the guiding state was integrated with.
        measure (PreferredMeasure): Unravelling basis.
        guiding (GuidingTrajectory): Guiding snapshots.
        seed (int or SeedSequence): Seed of the trajectory's own stream.

    Returns:
        Trajectory: Config, Bloch and probability series with the jump log.
    """
    result = run_batch(model, measure, guiding, [seed], keep_members=True, p_max=p_max, floor=floor)
    trajectory = result.members(guiding.grid, guiding.leakage_flag)[0]
    logger.info(f"Trajectory done: {trajectory.num_jumps} jumps "
                f"({result.jumps_up} up, {result.jumps_down} down)")
    _log_diagnostics("trajectory", trajectory.clamp_events, trajectory.overflow_steps, p_max)
    return trajectory


def run_ensemble(model, measure, guiding, n_trajectories, master_seed, threads=None,
                 keep_members=False, sample_steps=(), batch_size=None,
                 p_max=P_MAX, floor=PROBABILITY_FLOOR):
    """Run N independent trajectories and aggregate their Bloch vectors

    All batches advance over one pass of guiding blocks, so strided snapshots are
    re-integrated once per ensemble rather than once per batch.

    Args:
        model (HamiltonianModel): Model the guiding state was integrated with.
        measure (PreferredMeasure): Unravelling basis.
        guiding (GuidingTrajectory): Shared guiding snapshots.
        n_trajectories (int): Ensemble size N >= 1.
        master_seed (int): Seed from which every member's stream is derived.
        threads (int, optional): Worker threads. Defaults to MODALJUMP_THREADS.
        keep_members (bool, optional): Keep every member Trajectory.
        sample_steps (iterable, optional): Grid indices at which to histogram configs.
        batch_size (int, optional): Trajectories per vectorised batch.

    Returns:
        Ensemble: Mean Bloch vector and standard error per grid point.
    """
    if n_trajectories < 1:
        raise ValueError(f"ensemble needs at least one trajectory, got {n_trajectories}")
    batch_size = batch_size or BATCH_SIZE
    seeds = [trajectory_seed(master_seed, i) for i in range(n_trajectories)]
    runners = [BatchRunner(model, measure, guiding, seeds[s:s + batch_size], keep_members=keep_members,
                           sample_steps=sample_steps, p_max=p_max, floor=floor)
               for s in range(0, n_trajectories, batch_size)]
    workers = min(resolve_threads(threads), len(runners))

    logger.info(f"Running {n_trajectories} trajectories in {len(runners)} batches of up to "
                f"{batch_size} on {workers} threads")
    started = time.time()
    if workers == 1:
        for j0, states in guiding.iter_blocks(BLOCK_STEPS):
            for runner in runners:
                runner.advance(j0, states)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for j0, states in guiding.iter_blocks(BLOCK_STEPS):
                list(pool.map(lambda runner: runner.advance(j0, states), runners))
                logger.debug(f"Ensemble reached grid index {min(j0 + len(states), guiding.grid.size) - 1}")

    grid = guiding.grid
    count, mean, m2 = 0, np.zeros((grid.size, 3)), np.zeros((grid.size, 3))
    histograms = {}
    members = [] if keep_members else None
    clamp_events = overflow_steps = jumps_up = jumps_down = 0
    for result in (runner.result for runner in runners):
        count, mean, m2 = merge_moments(count, mean, m2, result.count, result.means, result.m2)
        for j, counts in result.histograms.items():
            histograms[j] = histograms[j] + counts if j in histograms else counts.copy()
        clamp_events += int(result.clamp_events.sum())
        overflow_steps += int(result.overflow_steps.sum())
        jumps_up += result.jumps_up
        jumps_down += result.jumps_down
        if keep_members:
            members.extend(result.members(grid, guiding.leakage_flag))

    n = n_trajectories
    if n > 1:
        standard_error = np.sqrt(m2 / (n - 1) / n)
    else:
        logger.warning("Single-trajectory ensemble: standard errors set to 0")
        standard_error = np.zeros_like(mean)

    logger.info(f"Ensemble done in {time.time() - started:.2f}s: {jumps_up} up and {jumps_down} down jumps")
    _log_diagnostics("ensemble", clamp_events, overflow_steps, p_max)
    return Ensemble(grid=grid, n_trajectories=n, master_seed=master_seed, mean_bloch=mean,
                    standard_error=standard_error, batch_size=batch_size, members=members,
                    histograms=histograms, clamp_events=clamp_events, overflow_steps=overflow_steps,
                    jumps_up=jumps_up, jumps_down=jumps_down, leakage_flag=guiding.leakage_flag)


@dataclass(frozen=True)
class JumpEvent:
    t: float
    step: int
    source: tuple
    target: tuple
    mode: int
    direction: str
    bloch_before: tuple
    bloch_after: tuple

    @property
    def dz(self):
        return self.bloch_after[2] - self.bloch_before[2]

    @property
    def x_flipped(self):
        return self.bloch_before[0] * self.bloch_after[0] < 0


def jump_events(trajectory):
    """Jumps of a trajectory with the Bloch vector on either side

    Returns:
        list: JumpEvent per jump; mode is 1-based, direction 'up' or 'down' in photon number.
    """
    events = []
    for j in np.flatnonzero(trajectory.jump_flags):
        source = tuple(int(n) for n in trajectory.configs[j - 1])
        target = tuple(int(n) for n in trajectory.configs[j])
        difference = np.subtract(target, source)
        mode = int(np.flatnonzero(difference)[0])
        events.append(JumpEvent(
            t=trajectory.grid.time(j), step=int(j), source=source, target=target, mode=mode + 1,
            direction='up' if difference[mode] > 0 else 'down',
            bloch_before=tuple(float(v) for v in trajectory.bloch[j - 1]),
            bloch_after=tuple(float(v) for v in trajectory.bloch[j])))
    return events
