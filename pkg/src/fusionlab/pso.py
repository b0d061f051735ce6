"""Bound-constrained particle swarm optimization of the filter parameters.

The decision vector concatenates the sigma-point scaling triple with the
diagonals of the process and measurement noise covariances:

    [alpha, beta, kappa, q_1..q_m, r_1..r_n]

Velocity update per particle i, with fresh uniform(0, 1) draws per
dimension and inertia omega (linearly decayed by default):

    v <- omega * v + c1 * r1 * (pbest - p) + c2 * r2 * (gbest - p)

Velocities are clamped to a fraction of each dimension's bound span and
positions are projected back into the box after every move.  The objective
is the positional RMSE of a full filter pass; candidates whose filter
diverges score +inf so any finite run dominates them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import filters
from .batch import run_ukf_batch
from .filters import FilterParams, StateEstimate
from .simulate import SensorDataset


class NoFeasibleParticleError(RuntimeError):
    """Every fitness evaluation in the whole run came back infinite."""


@dataclass(frozen=True)
class ParameterBounds:
    """Box constraints over the decision vector, ordered like the vector."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, float).copy())
        object.__setattr__(self, "upper", np.asarray(self.upper, float).copy())
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("lower/upper must be 1-D vectors of equal length")
        if not np.all(self.lower < self.upper):
            raise ValueError("bounds require lower < upper elementwise")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lower, self.upper)


def default_bounds(m: int = filters.N_STATE, n: int = filters.N_MEAS) -> ParameterBounds:
    """The tuning search space for m process and n measurement variances."""
    lo_noise, hi_noise = filters.NOISE_BOUNDS
    lower = np.array([filters.ALPHA_BOUNDS[0], filters.BETA_BOUNDS[0],
                      filters.KAPPA_BOUNDS[0]] + [lo_noise] * (m + n))
    upper = np.array([filters.ALPHA_BOUNDS[1], filters.BETA_BOUNDS[1],
                      filters.KAPPA_BOUNDS[1]] + [hi_noise] * (m + n))
    return ParameterBounds(lower, upper)


def encode(params: FilterParams) -> np.ndarray:
    return np.concatenate([[params.alpha, params.beta, params.kappa],
                           params.q_diag, params.r_diag])


def decode(position: np.ndarray, m: int = filters.N_STATE,
           n: int = filters.N_MEAS) -> FilterParams:
    position = np.asarray(position, float)
    if position.shape != (3 + m + n,):
        raise ValueError(f"decision vector must have length {3 + m + n}, "
                         f"got {position.shape}")
    return FilterParams(alpha=float(position[0]), beta=float(position[1]),
                        kappa=float(position[2]), q_diag=position[3:3 + m],
                        r_diag=position[3 + m:])


@dataclass(frozen=True)
class SwarmConfig:
    n_particles: int = 30
    n_generations: int = 50
    c1: float = 1.5
    c2: float = 1.5
    inertia: float | tuple[float, float] = (0.9, 0.4)
    seed: int = 0
    v_max_fraction: float = 0.2

    def __post_init__(self):
        if self.n_particles <= 0 or self.n_generations <= 0:
            raise ValueError("particle and generation counts must be > 0")
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("acceleration constants must be >= 0")
        values = self.inertia if isinstance(self.inertia, tuple) else (self.inertia,)
        if not all(0.0 < w < 1.5 for w in values):
            raise ValueError("inertia values must lie in (0, 1.5)")
        if not (0.0 < self.v_max_fraction <= 1.0):
            raise ValueError("v_max_fraction must lie in (0, 1]")

    def inertia_at(self, generation: int) -> float:
        if not isinstance(self.inertia, tuple):
            return float(self.inertia)
        start, end = self.inertia
        if self.n_generations == 1:
            return float(start)
        frac = generation / (self.n_generations - 1)
        return float(start + (end - start) * frac)


@dataclass(frozen=True)
class Particle:
    """Read-only view of one swarm member."""

    position: np.ndarray
    velocity: np.ndarray
    best_position: np.ndarray
    best_fitness: float


@dataclass
class Swarm:
    bounds: ParameterBounds
    positions: np.ndarray       # (P, D)
    velocities: np.ndarray      # (P, D)
    pbest_positions: np.ndarray
    pbest_fitness: np.ndarray   # (P,)
    gbest_position: np.ndarray  # (D,)
    gbest_fitness: float
    evaluations: int = 0

    def particle(self, i: int) -> Particle:
        return Particle(self.positions[i].copy(), self.velocities[i].copy(),
                        self.pbest_positions[i].copy(), float(self.pbest_fitness[i]))

    @property
    def n_particles(self) -> int:
        return len(self.positions)


def _evaluate(positions, fitness_fn, batch_fitness):
    if batch_fitness is not None:
        values = np.asarray(batch_fitness(positions), float)
        if values.shape != (len(positions),):
            raise ValueError("batch fitness must return one value per particle")
        return values
    return np.array([float(fitness_fn(x)) for x in positions])


def init_swarm(bounds: ParameterBounds, config: SwarmConfig, rng,
               fitness_fn=None, batch_fitness=None,
               init_positions: np.ndarray | None = None) -> Swarm:
    """Evaluate an initial population (uniform in the box unless given)."""
    P, D = config.n_particles, bounds.dim
    if init_positions is None:
        positions = bounds.lower + rng.random((P, D)) * bounds.span
    else:
        positions = bounds.clip(np.asarray(init_positions, float).copy())
        if positions.shape != (P, D):
            raise ValueError("init_positions shape mismatch")
    v_max = config.v_max_fraction * bounds.span
    velocities = rng.uniform(-1.0, 1.0, (P, D)) * v_max
    fit = _evaluate(positions, fitness_fn, batch_fitness)
    best = int(np.argmin(fit))
    return Swarm(bounds=bounds, positions=positions, velocities=velocities,
                 pbest_positions=positions.copy(), pbest_fitness=fit.copy(),
                 gbest_position=positions[best].copy(),
                 gbest_fitness=float(fit[best]), evaluations=P)


def pso_step(swarm: Swarm, fitness_fn, generation_index: int,
             config: SwarmConfig, rng, batch_fitness=None) -> Swarm:
    """Advance the swarm one generation (in place), returning it.

    pbest/gbest update only on strict improvement; the gbest reduction is a
    sequential fold over particle indices so results do not depend on any
    parallel evaluation schedule.
    """
    w = config.inertia_at(generation_index)
    P, D = swarm.positions.shape
    v_max = config.v_max_fraction * swarm.bounds.span
    r1 = rng.random((P, D))
    r2 = rng.random((P, D))
    swarm.velocities = (w * swarm.velocities
                        + config.c1 * r1 * (swarm.pbest_positions - swarm.positions)
                        + config.c2 * r2 * (swarm.gbest_position - swarm.positions))
    np.clip(swarm.velocities, -v_max, v_max, out=swarm.velocities)
    swarm.positions = swarm.bounds.clip(swarm.positions + swarm.velocities)
    fit = _evaluate(swarm.positions, fitness_fn, batch_fitness)
    swarm.evaluations += P
    improved = fit < swarm.pbest_fitness
    swarm.pbest_fitness[improved] = fit[improved]
    swarm.pbest_positions[improved] = swarm.positions[improved]
    best = int(np.argmin(swarm.pbest_fitness))
    if swarm.pbest_fitness[best] < swarm.gbest_fitness:
        swarm.gbest_fitness = float(swarm.pbest_fitness[best])
        swarm.gbest_position = swarm.pbest_positions[best].copy()
    return swarm


@dataclass(frozen=True)
class PsoResult:
    best_position: np.ndarray
    best_fitness: float
    history: np.ndarray     # per-generation gbest fitness
    evaluations: int
    init_fitness: float     # gbest after the initial evaluation


def minimize(fitness_fn, bounds: ParameterBounds, config: SwarmConfig,
             batch_fitness=None, init_sampler=None) -> PsoResult:
    """Generic bound-constrained PSO minimization.

    init_sampler(bounds, config, rng) may override the uniform initial
    population; it draws from the same stream as the rest of the run, so a
    fixed seed still fixes the whole trace.
    """
    rng = np.random.default_rng(config.seed)
    init_positions = None if init_sampler is None else init_sampler(bounds, config, rng)
    swarm = init_swarm(bounds, config, rng, fitness_fn, batch_fitness,
                       init_positions)
    init_fitness = swarm.gbest_fitness
    history = np.empty(config.n_generations)
    for g in range(config.n_generations):
        pso_step(swarm, fitness_fn, g, config, rng, batch_fitness)
        history[g] = swarm.gbest_fitness
    if not np.isfinite(swarm.gbest_fitness):
        raise NoFeasibleParticleError(
            "no feasible particle: every evaluation diverged")
    return PsoResult(best_position=swarm.gbest_position.copy(),
                     best_fitness=float(swarm.gbest_fitness),
                     history=history, evaluations=swarm.evaluations,
                     init_fitness=float(init_fitness))


# ---------------------------------------------------------------------------
# Filter-tuning objective
# ---------------------------------------------------------------------------

def fitness(params: FilterParams, datasets, init: StateEstimate | None = None,
            reference: str = "truth") -> float:
    """Positional RMSE of a filter run; +inf when the filter diverges.

    Over several datasets the result is the pooled RMSE across all samples
    (the single-run definition applied to the concatenated trajectories),
    so a badly-tracked scenario is penalized by its full squared error.
    """
    if isinstance(datasets, SensorDataset):
        datasets = [datasets]
    sq_sum, n_total = 0.0, 0
    for ds in datasets:
        res = run_ukf_batch([params], ds, init=init, reference=reference)
        value = float(res.rmse[0])
        if not np.isfinite(value):
            return float("inf")
        sq_sum += value * value * res.n_scored
        n_total += res.n_scored
    return float(np.sqrt(sq_sum / n_total))


@dataclass(frozen=True)
class TuningResult:
    best_params: FilterParams
    best_fitness: float
    history: np.ndarray
    evaluations: int
    best_position: np.ndarray
    init_fitness: float


def _log_uniform_init(bounds: ParameterBounds, config: SwarmConfig, rng
                      ) -> np.ndarray:
    """Uniform init for the scaling triple, log-uniform for the noise dims.

    The noise bounds span six decades; uniform draws would almost never
    propose small variances.
    """
    P, D = config.n_particles, bounds.dim
    positions = bounds.lower + rng.random((P, D)) * bounds.span
    for d in range(3, D):
        lo, hi = bounds.lower[d], bounds.upper[d]
        if lo > 0:
            positions[:, d] = np.exp(rng.uniform(np.log(lo), np.log(hi), P))
    return positions


def optimize(train_datasets, bounds: ParameterBounds | None = None,
             config: SwarmConfig | None = None,
             init: StateEstimate | None = None,
             reference: str = "truth") -> TuningResult:
    """Tune the filter on the training data with the swarm optimizer."""
    if isinstance(train_datasets, SensorDataset):
        train_datasets = [train_datasets]
    if not train_datasets:
        raise ValueError("need at least one training dataset")
    bounds = default_bounds() if bounds is None else bounds
    config = SwarmConfig() if config is None else config
    m = filters.N_STATE
    n = bounds.dim - 3 - m
    if n != filters.N_MEAS:
        raise ValueError("bounds length does not match the decision vector")

    def batch_fitness(positions):
        param_sets = [decode(x, m, n) for x in positions]
        sq = np.zeros(len(param_sets))
        n_total = 0
        for ds in train_datasets:
            res = run_ukf_batch(param_sets, ds, init=init, reference=reference)
            sq += res.rmse ** 2 * res.n_scored  # inf propagates
            n_total += res.n_scored
        return np.sqrt(sq / n_total)

    result = minimize(None, bounds, config, batch_fitness=batch_fitness,
                      init_sampler=_log_uniform_init)
    return TuningResult(best_params=decode(result.best_position, m, n),
                        best_fitness=result.best_fitness,
                        history=result.history,
                        evaluations=result.evaluations,
                        best_position=result.best_position,
                        init_fitness=result.init_fitness)
