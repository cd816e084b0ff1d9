"""Budgeted two-fidelity optimization loop and supporting optimizers.

The loop seeds the surrogate with a space-filling simulation design,
then repeatedly asks the acquisition for the (gains, fidelity) pair
with the best expected entropy reduction per unit cost, evaluates it,
and refits.  Costs are standardized internally; everything reported
back to the caller is in raw cost units.

Also here: the derivative-free simplex search used for hyperparameter
fitting, brute-force and random-search baselines, and the paired
episode scorer used to compare default against optimized gains.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import (
    AcquisitionConfig,
    entropy,
    make_grid,
    pmin_distribution,
    select_next,
)
from .bounds import Box
from .errors import InvalidArgumentError, OperatorAbort, OperatorSkip
from .gp import (
    GPModel,
    HyperBounds,
    NoiseConfig,
    Observation,
    fit,
    optimize_hyperparameters,
    posterior_mean,
    standardize,
)
from .kernels import AugmentedParam, CompositeKernelConfig, Fidelity, aug
from .seeds import (
    STREAM_ACQ,
    STREAM_ENTROPY,
    STREAM_EVAL,
    STREAM_HYPER,
    STREAM_IMPROVE,
    substream,
)


@dataclass
class Budget:
    """Evaluation budget split between total tries and real-plant tries."""

    max_real: int
    max_total: int
    used_real: int = 0
    used_total: int = 0

    def __post_init__(self):
        if self.max_total < 1:
            raise InvalidArgumentError(f"max_total must be >= 1, got {self.max_total}")
        if not 0 <= self.max_real <= self.max_total:
            raise InvalidArgumentError(
                f"need 0 <= max_real <= max_total, got {self.max_real}/{self.max_total}"
            )
        if self.used_real < 0 or self.used_total < 0:
            raise InvalidArgumentError("usage counters must be non-negative")

    def sim_feasible(self) -> bool:
        return self.used_total < self.max_total

    def real_feasible(self) -> bool:
        return self.used_total < self.max_total and self.used_real < self.max_real

    def consume(self, fidelity: Fidelity) -> None:
        if fidelity is Fidelity.REAL:
            if not self.real_feasible():
                raise InvalidArgumentError("real budget exhausted")
            self.used_real += 1
        elif not self.sim_feasible():
            raise InvalidArgumentError("total budget exhausted")
        self.used_total += 1


@dataclass(frozen=True)
class IterationRecord:
    """One evaluation: what was tried, what it cost, what it taught us."""

    index: int
    a: AugmentedParam             # physical-space gains plus fidelity
    cost: float
    entropy_before: float | None  # None for initial-design points
    entropy_after: float | None
    real_used: int
    total_used: int
    elapsed_s: float


@dataclass
class RunHistory:
    records: list[IterationRecord]
    incumbent_x: tuple[float, ...]
    incumbent_cost: float
    seed: int
    config_hash: str
    stop_reason: str


@dataclass
class RunResult:
    """Full output of a loop run, including the final surrogate."""

    history: RunHistory
    model: GPModel                 # fit on standardized costs
    kernel: CompositeKernelConfig
    cost_offset: float
    cost_scale: float
    budgets: Budget
    observations: list[Observation]  # unit-coordinate points, raw costs


@dataclass(frozen=True)
class Problem:
    """Evaluation callbacks, signature cost_fn(x_physical, seed) -> float."""

    sim_cost: object
    real_cost: object
    sim_duration_s: float = 0.0   # deterministic per-evaluation experiment time
    real_duration_s: float = 0.0


@dataclass(frozen=True)
class LoopSettings:
    init_design: int = 8       # simulation-only seeding evaluations
    sim_repeats: int = 4       # rollouts averaged into one sim evaluation
    stall_window: int = 10
    stall_tol: float = 1e-3
    refit_every: int = 1       # hyperparameter refit cadence, in evaluations

    def __post_init__(self):
        if self.init_design < 2:
            raise InvalidArgumentError("init_design must be >= 2")
        if self.sim_repeats < 1:
            raise InvalidArgumentError("sim_repeats must be >= 1")
        if self.stall_window < 1 or self.stall_tol <= 0:
            raise InvalidArgumentError("stall_window must be >= 1 and stall_tol > 0")
        if self.refit_every < 1:
            raise InvalidArgumentError("refit_every must be >= 1")


@dataclass(frozen=True)
class GPSettings:
    kernel: CompositeKernelConfig = field(default_factory=CompositeKernelConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    hyper_bounds: HyperBounds = field(default_factory=HyperBounds)
    fit_hyperparameters: bool = True
    restarts: int = 4
    hyper_max_iters: int = 120


def nelder_mead(f, x0, init_scale: float = 1.0, tolerance: float = 1e-8, max_iters: int = 500):
    """Downhill simplex minimization of ``f`` from ``x0``.

    Standard reflection/expansion/contraction/shrink coefficients
    (1, 2, 0.5, 0.5).  Stops when the simplex's value spread falls
    below ``tolerance`` or after ``max_iters`` sweeps.  Returns
    (x_best, f_best, iterations); f_best never exceeds f(x0).
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1 or x0.size == 0:
        raise InvalidArgumentError("x0 must be a non-empty 1-d point")
    if init_scale <= 0 or tolerance <= 0 or max_iters < 1:
        raise InvalidArgumentError("init_scale, tolerance, max_iters must be positive")
    dim = x0.size
    simplex = [x0.copy()]
    for i in range(dim):
        vertex = x0.copy()
        vertex[i] += init_scale
        simplex.append(vertex)
    values = [float(f(v)) for v in simplex]

    iters = 0
    for _ in range(max_iters):
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        if values[-1] - values[0] < tolerance:
            break
        iters += 1

        centroid = np.mean(simplex[:-1], axis=0)
        reflected = centroid + (centroid - simplex[-1])
        f_r = float(f(reflected))
        if f_r < values[0]:
            expanded = centroid + 2.0 * (reflected - centroid)
            f_e = float(f(expanded))
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
            continue
        if f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
            continue
        if f_r < values[-1]:
            contracted = centroid + 0.5 * (reflected - centroid)
        else:
            contracted = centroid + 0.5 * (simplex[-1] - centroid)
        f_c = float(f(contracted))
        if f_c < min(f_r, values[-1]):
            simplex[-1], values[-1] = contracted, f_c
            continue
        best = simplex[0]
        for i in range(1, dim + 1):
            simplex[i] = best + 0.5 * (simplex[i] - best)
            values[i] = float(f(simplex[i]))

    i_best = int(np.argmin(values))
    return simplex[i_best].copy(), values[i_best], iters


def grid_oracle(f, bounds: Box, resolution: int):
    """Exhaustive lattice minimization; ties keep the first point scanned."""
    if resolution < 2:
        raise InvalidArgumentError(f"resolution must be >= 2, got {resolution}")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(bounds.lower, bounds.upper)]
    best_x, best_f = None, math.inf
    for idx in np.ndindex(*([resolution] * bounds.dim)):
        x = tuple(axes[d][idx[d]] for d in range(bounds.dim))
        fx = float(f(x))
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def random_search(f, bounds: Box, n_evals: int, seed: int):
    """Uniform random baseline.  Draws are sequential, so the best after
    n evaluations is a prefix of the best after n+k with the same seed."""
    if n_evals < 1:
        raise InvalidArgumentError(f"n_evals must be >= 1, got {n_evals}")
    rng = np.random.default_rng(seed)
    lower = np.asarray(bounds.lower)
    span = np.asarray(bounds.upper) - lower
    best_x, best_f = None, math.inf
    for _ in range(n_evals):
        x = tuple(lower + rng.uniform(size=bounds.dim) * span)
        fx = float(f(x))
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, best_f


@dataclass(frozen=True)
class ImprovementReport:
    episodes: int
    mean_default: float
    mean_optimized: float
    reduction_fraction: float
    default_costs: tuple[float, ...]
    optimized_costs: tuple[float, ...]


def evaluate_improvement(eval_fn, default_gains, optimized_gains, episodes: int, seed: int) -> ImprovementReport:
    """Paired-episode comparison of two gain settings.

    Each episode evaluates both settings under the same derived seed, so
    the comparison is paired.  ``eval_fn(gains, seed) -> cost`` should
    return the deviation measure alone.  Reduction is relative to the
    default's mean; identical gains give exactly zero.
    """
    if episodes < 1:
        raise InvalidArgumentError(f"episodes must be >= 1, got {episodes}")
    defaults, optimized = [], []
    for i in range(episodes):
        episode_seed = substream(seed, STREAM_IMPROVE, i)
        defaults.append(float(eval_fn(default_gains, episode_seed)))
        optimized.append(float(eval_fn(optimized_gains, episode_seed)))
    mean_def = sum(defaults) / episodes
    mean_opt = sum(optimized) / episodes
    reduction = 0.0 if mean_def == 0.0 else 1.0 - mean_opt / mean_def
    return ImprovementReport(
        episodes=episodes,
        mean_default=mean_def,
        mean_optimized=mean_opt,
        reduction_fraction=reduction,
        default_costs=tuple(defaults),
        optimized_costs=tuple(optimized),
    )


def _standardized_fit(observations, gp_settings: GPSettings, kernel_cfg, hyper_seed, refit):
    """Fit on standardized costs; returns (model, kernel, offset, scale)."""
    y_std, offset, scale = standardize([o.cost for o in observations])
    obs_std = [replace(o, cost=float(y)) for o, y in zip(observations, y_std)]
    noise = gp_settings.noise
    noise_std = NoiseConfig(
        sim_noise_variance=noise.sim_noise_variance / scale**2,
        real_noise_variance=noise.real_noise_variance / scale**2,
        jitter=noise.jitter,
    )
    if kernel_cfg is None:
        kernel_cfg = gp_settings.kernel
    if refit and gp_settings.fit_hyperparameters:
        kernel_cfg = optimize_hyperparameters(
            obs_std,
            gp_settings.hyper_bounds,
            noise_std,
            restarts=gp_settings.restarts,
            seed=hyper_seed,
            start=kernel_cfg,
            max_iters=gp_settings.hyper_max_iters,
        )
    model = fit(obs_std, kernel_cfg, noise_std)
    return model, kernel_cfg, offset, scale


def final_incumbent(observations, bounds: Box, gp_settings: GPSettings, acq: AcquisitionConfig, seed: int, used_total: int):
    """Recompute the final recommendation from raw observations alone.

    Hyperparameters are refit from the default start (no warm chain),
    seeded only by (seed, used_total), so a validator holding the
    history can reproduce the incumbent bit for bit.  Returns
    (x_physical, raw_cost, model, kernel, offset, scale).
    """
    model, kernel_cfg, offset, scale = _standardized_fit(
        observations,
        gp_settings,
        kernel_cfg=None,
        hyper_seed=substream(seed, STREAM_HYPER, used_total, 1),
        refit=True,
    )
    grid = make_grid(Box.unit(bounds.dim), acq.grid_size, Fidelity.REAL)
    means = posterior_mean(model, grid)
    j = int(np.argmin(means))
    x_phys = tuple(float(v) for v in bounds.from_unit(grid[j].x))
    return x_phys, float(means[j] * scale + offset), model, kernel_cfg, offset, scale


def run_bo(
    problem: Problem,
    bounds: Box,
    budgets: Budget,
    gp_settings: GPSettings,
    acq: AcquisitionConfig,
    seed: int,
    loop: LoopSettings = LoopSettings(),
    on_record=None,
    config_hash: str = "",
) -> RunResult:
    """Run the full loop until a budget or stall stop.

    Evaluation seeds derive from (seed, evaluation index), so identical
    configurations replay identically.  A skip raised by the real-cost
    callback excludes that candidate for the current round and
    re-selects; an abort stops the loop, and the partial run is still
    summarized.
    """
    unit_box = Box.unit(bounds.dim)
    records: list[IterationRecord] = []
    observations: list[Observation] = []

    def emit(record: IterationRecord) -> None:
        records.append(record)
        if on_record is not None:
            on_record(record)

    # seeding design: simulation only, spread over the unit box
    for point in make_grid(unit_box, loop.init_design, Fidelity.SIMULATION):
        if not budgets.sim_feasible():
            break
        x_phys = tuple(bounds.from_unit(point.x))
        cost = float(problem.sim_cost(x_phys, substream(seed, STREAM_EVAL, budgets.used_total)))
        budgets.consume(Fidelity.SIMULATION)
        observations.append(Observation(point, cost, repeats=loop.sim_repeats))
        emit(IterationRecord(
            index=budgets.used_total - 1,
            a=aug(x_phys, Fidelity.SIMULATION),
            cost=cost,
            entropy_before=None,
            entropy_after=None,
            real_used=budgets.used_real,
            total_used=budgets.used_total,
            elapsed_s=problem.sim_duration_s,
        ))

    kernel_cfg = gp_settings.kernel
    model, kernel_cfg, offset, scale = _standardized_fit(
        observations, gp_settings, kernel_cfg,
        hyper_seed=substream(seed, STREAM_HYPER, budgets.used_total),
        refit=True,
    )
    grid = make_grid(unit_box, acq.grid_size, Fidelity.REAL)

    incumbent_trace: list[float] = []
    stop_reason = "total-budget"
    while budgets.used_total < budgets.max_total:
        step = budgets.used_total

        means = posterior_mean(model, grid)
        incumbent_trace.append(float(np.min(means)) * scale + offset)
        if budgets.used_real >= budgets.max_real and len(incumbent_trace) > loop.stall_window:
            window = incumbent_trace[-(loop.stall_window + 1):]
            if max(window) - min(window) < loop.stall_tol:
                stop_reason = "stalled"
                break

        h_before = entropy(pmin_distribution(
            model, grid, acq.mc_samples, substream(seed, STREAM_ENTROPY, step, 0)
        ).probabilities)

        excluded: set[tuple[Fidelity, int]] = set()
        aborted = False
        while True:
            selection = select_next(
                model, unit_box, budgets, acq,
                substream(seed, STREAM_ACQ, step), excluded=excluded,
            )
            chosen = selection.point
            x_phys = tuple(bounds.from_unit(chosen.x))
            eval_seed = substream(seed, STREAM_EVAL, step)
            try:
                if chosen.delta is Fidelity.SIMULATION:
                    cost = float(problem.sim_cost(x_phys, eval_seed))
                    repeats, elapsed = loop.sim_repeats, problem.sim_duration_s
                else:
                    cost = float(problem.real_cost(x_phys, eval_seed))
                    repeats, elapsed = 1, problem.real_duration_s
                break
            except OperatorSkip:
                excluded.add((chosen.delta, selection.index))
            except OperatorAbort:
                aborted = True
                break
        if aborted:
            stop_reason = "aborted"
            break

        budgets.consume(chosen.delta)
        observations.append(Observation(chosen, cost, repeats=repeats))
        refit = budgets.used_total % loop.refit_every == 0
        model, kernel_cfg, offset, scale = _standardized_fit(
            observations, gp_settings, kernel_cfg,
            hyper_seed=substream(seed, STREAM_HYPER, budgets.used_total),
            refit=refit,
        )
        h_after = entropy(pmin_distribution(
            model, grid, acq.mc_samples, substream(seed, STREAM_ENTROPY, step, 1)
        ).probabilities)
        emit(IterationRecord(
            index=step,
            a=aug(x_phys, chosen.delta),
            cost=cost,
            entropy_before=h_before,
            entropy_after=h_after,
            real_used=budgets.used_real,
            total_used=budgets.used_total,
            elapsed_s=elapsed,
        ))

    incumbent_x, incumbent_cost, model, kernel_cfg, offset, scale = final_incumbent(
        observations, bounds, gp_settings, acq, seed, budgets.used_total
    )
    history = RunHistory(
        records=records,
        incumbent_x=incumbent_x,
        incumbent_cost=incumbent_cost,
        seed=seed,
        config_hash=config_hash,
        stop_reason=stop_reason,
    )
    return RunResult(
        history=history,
        model=model,
        kernel=kernel_cfg,
        cost_offset=offset,
        cost_scale=scale,
        budgets=budgets,
        observations=observations,
    )
