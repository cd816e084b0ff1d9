"""Entropy-search acquisition over a fixed candidate grid.

The quantity of interest is p_min, the distribution of the location of
the best real-fidelity gains over a deterministic grid, estimated by
counting argmins across joint posterior samples.  A candidate
evaluation is scored by how much it is expected to shrink the Shannon
entropy of p_min, per unit of its fidelity's evaluation cost.

Fantasy conditioning uses the pathwise (Matheron) update: with a joint
draw (f_grid, f_cand) from the current posterior and a fantasized
observation y, the draw

    f_grid + cov(grid, cand) * (y - f_cand - eps) / var(y)

is distributed exactly as a posterior draw conditioned on y.  All draws
within one candidate evaluation share common random numbers, so a
candidate that cannot change the posterior scores an entropy change of
exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .bounds import Box
from .errors import BudgetExhaustedError, InvalidArgumentError
from .gp import GPModel, _chol_with_jitter, sample_posterior
from .kernels import AugmentedParam, Fidelity, composite_kernel, kernel_cross, kernel_matrix
from .seeds import STREAM_CANDIDATE, substream

# enough odd primes for any plausible gain-space dimension
_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


@dataclass(frozen=True)
class AcquisitionConfig:
    grid_size: int = 200
    mc_samples: int = 200     # joint posterior samples per p_min estimate
    fantasy_draws: int = 10   # fantasized observations per candidate
    cost_sim: float = 1.0
    cost_real: float = 10.0
    seed_stream: int = 0      # extra tag mixed into per-candidate seeds

    def __post_init__(self):
        if self.grid_size < 2:
            raise InvalidArgumentError(f"grid_size must be >= 2, got {self.grid_size}")
        if self.mc_samples < 10:
            raise InvalidArgumentError(f"mc_samples must be >= 10, got {self.mc_samples}")
        if self.fantasy_draws < 1:
            raise InvalidArgumentError("fantasy_draws must be >= 1")
        if not (self.cost_sim > 0 and self.cost_real > 0):
            raise InvalidArgumentError("fidelity costs must be > 0")


@dataclass(frozen=True)
class PminDistribution:
    """Probabilities of each grid point holding the real-fidelity minimum."""

    probabilities: np.ndarray
    points: tuple[AugmentedParam, ...]


@dataclass(frozen=True)
class Selection:
    """Result of one acquisition round."""

    point: AugmentedParam
    index: int              # grid index of the chosen x
    score: float            # entropy change per unit cost
    entropy_change: float


def make_grid(bounds: Box, grid_size: int, fidelity: Fidelity) -> list[AugmentedParam]:
    """Deterministic space-filling grid inside ``bounds``.

    The first coordinate is stratified end to end; remaining coordinates
    follow irrational-stride (Kronecker) shifts so low-dimensional
    projections stay close to uniform.  Same bounds and size always
    yield the same points.
    """
    if grid_size < 2:
        raise InvalidArgumentError(f"grid_size must be >= 2, got {grid_size}")
    n, dim = int(grid_size), bounds.dim
    u = np.empty((n, dim))
    u[:, 0] = np.arange(n) / (n - 1)
    for d in range(1, dim):
        stride = math.sqrt(_PRIMES[(d - 1) % len(_PRIMES)]) % 1.0
        u[:, d] = (0.5 + np.arange(n) * stride) % 1.0
    return [AugmentedParam(tuple(bounds.from_unit(row)), fidelity) for row in u]


def entropy(probabilities) -> float:
    """Shannon entropy in nats; zero-probability entries contribute zero."""
    p = np.asarray(probabilities, dtype=float)
    if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-6:
        raise InvalidArgumentError("probabilities must be non-negative and sum to 1")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def pmin_distribution(model: GPModel, grid, n_samples: int, seed: int) -> PminDistribution:
    """Estimate p_min by argmin counting over joint posterior samples."""
    pts = list(grid)
    if len(pts) < 2:
        raise InvalidArgumentError("grid must contain at least 2 points")
    draws = sample_posterior(model, pts, n_samples, seed)
    idx = np.argmin(draws, axis=1)  # ties resolve to the lowest index
    counts = np.bincount(idx, minlength=len(pts))
    return PminDistribution(counts / float(n_samples), tuple(pts))


@dataclass(frozen=True)
class _GridBlock:
    """Cached posterior and joint draws over the p_min grid.

    Shared across every candidate scored in one acquisition round, so
    the S x G sampling cost is paid once and candidates differ only in
    their own covariance column and fantasy draws.
    """

    mean: np.ndarray      # (G,)
    chol: np.ndarray      # (G, G) lower factor of posterior cov + jitter
    v_train: np.ndarray   # (n, G), L_train^-1 K(train, grid)
    jitter: float
    z: np.ndarray         # (S, G) standard normals behind f_grid
    f_grid: np.ndarray    # (S, G) joint posterior draws
    h_now: float          # p_min entropy of f_grid


def _grid_block(model: GPModel, grid, n_samples: int, seed: int) -> _GridBlock:
    k_xg = kernel_cross(model.points, grid, model.kernel)
    mean = k_xg.T @ model.alpha_vec
    v_train = solve_triangular(model.chol, k_xg, lower=True)
    cov = kernel_matrix(grid, model.kernel) - v_train.T @ v_train
    chol_l, eff = _chol_with_jitter(cov, model.noise.jitter)
    z = np.random.default_rng(seed).standard_normal((n_samples, len(grid)))
    f_grid = mean + z @ chol_l.T
    h_now = _count_entropy(f_grid, len(grid), n_samples)
    return _GridBlock(mean=mean, chol=chol_l, v_train=v_train, jitter=eff,
                      z=z, f_grid=f_grid, h_now=h_now)


def expected_entropy_change(
    model: GPModel,
    grid,
    candidate: AugmentedParam,
    cfg: AcquisitionConfig,
    seed: int,
    _block: _GridBlock | None = None,
) -> float:
    """Expected drop in p_min entropy from observing ``candidate``.

    Averages over ``fantasy_draws`` observations pulled from the
    candidate's posterior predictive (with its fidelity's noise), each
    conditioned into the shared grid samples by the pathwise update.
    Common random numbers across fantasies mean a candidate that cannot
    move the posterior scores approximately zero.
    """
    pts = list(grid)
    n_grid = len(pts)
    if n_grid < 2:
        raise InvalidArgumentError("grid must contain at least 2 points")
    if _block is None:
        block = _grid_block(model, pts, cfg.mc_samples, substream(seed, 0))
        cand_seed = substream(seed, 1)
    else:
        block, cand_seed = _block, seed

    # posterior pieces at the candidate
    k_xc = kernel_cross(model.points, [candidate], model.kernel)
    vc = solve_triangular(model.chol, k_xc, lower=True)[:, 0]
    m_c = float(k_xc[:, 0] @ model.alpha_vec)
    k_cc = composite_kernel(candidate, candidate, model.kernel)
    # posterior covariance between each grid point and the candidate
    k_gc = kernel_cross(pts, [candidate], model.kernel)[:, 0]
    v = k_gc - block.v_train.T @ vc
    w = solve_triangular(block.chol, v, lower=True)
    resid = k_cc - float(vc @ vc) - float(w @ w)
    d = math.sqrt(max(resid, block.jitter))

    s2 = model.noise.variance_for(candidate.delta)
    var_c = float(w @ w) + d * d  # candidate variance as realized by the draws
    denom = var_c + s2

    n_samples, n_fantasy = cfg.mc_samples, cfg.fantasy_draws
    rng = np.random.default_rng(cand_seed)
    z_c = rng.standard_normal(n_samples)
    f_cand = m_c + block.z @ w + z_c * d
    eps = rng.standard_normal(n_samples) * math.sqrt(s2)
    ys = m_c + math.sqrt(denom) * rng.standard_normal(n_fantasy)

    h_sum = 0.0
    for y in ys:
        adj = (y - f_cand - eps) / denom
        h_sum += _count_entropy(block.f_grid + adj[:, None] * v[None, :], n_grid, n_samples)
    return block.h_now - h_sum / n_fantasy


def _count_entropy(draws: np.ndarray, n_grid: int, n_samples: int) -> float:
    counts = np.bincount(np.argmin(draws, axis=1), minlength=n_grid)
    p = counts[counts > 0] / float(n_samples)
    return float(-(p * np.log(p)).sum())


def select_next(
    model: GPModel,
    bounds: Box,
    budgets,
    cfg: AcquisitionConfig,
    seed: int,
    excluded=frozenset(),
) -> Selection:
    """Pick the budget-feasible (x, fidelity) with the best entropy rate.

    Every grid point is scored at each feasible fidelity with its own
    derived seed, so scores do not depend on evaluation order.  Ties
    break toward the lowest grid index, simulation before real.  p_min
    always lives on the real-fidelity grid.
    """
    fidelities = []
    if budgets.sim_feasible():
        fidelities.append(Fidelity.SIMULATION)
    if budgets.real_feasible():
        fidelities.append(Fidelity.REAL)
    if not fidelities:
        raise BudgetExhaustedError(
            f"no feasible fidelity: real {budgets.used_real}/{budgets.max_real}, "
            f"total {budgets.used_total}/{budgets.max_total}"
        )

    grid = make_grid(bounds, cfg.grid_size, Fidelity.REAL)
    block = _grid_block(model, grid, cfg.mc_samples,
                        substream(seed, STREAM_CANDIDATE, cfg.seed_stream))
    excluded = frozenset(excluded)

    best: Selection | None = None
    for fid in fidelities:
        cost = cfg.cost_sim if fid is Fidelity.SIMULATION else cfg.cost_real
        fid_tag = 0 if fid is Fidelity.SIMULATION else 1
        for i, g in enumerate(grid):
            if (fid, i) in excluded:
                continue
            cand = AugmentedParam(g.x, fid)
            cand_seed = substream(seed, STREAM_CANDIDATE, cfg.seed_stream, fid_tag, i)
            change = expected_entropy_change(model, grid, cand, cfg, cand_seed, _block=block)
            score = change / cost
            if best is None or score > best.score:
                best = Selection(point=cand, index=i, score=score, entropy_change=change)
    if best is None:
        raise BudgetExhaustedError("every candidate was excluded")
    return best
