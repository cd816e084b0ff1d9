"""Gaussian-process regression over augmented gain points.

Costs are modelled with a zero prior mean, so callers are expected to
feed standardized values (see :func:`standardize`); the optimization
loop keeps a running mean/scale over its current observations and
undoes the transform when reporting.  Noise variances are fixed from
configuration and never fitted; kernel hyperparameters can be refit by
maximum marginal likelihood.

Factorizations go through Cholesky with an escalating jitter floor.
The dense-inverse formulation is reserved for test oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import InvalidArgumentError, NumericalError
from .kernels import (
    AugmentedParam,
    CompositeKernelConfig,
    Fidelity,
    RQConfig,
    kernel_cross,
    kernel_matrix,
)

MAX_JITTER = 1e-4


@dataclass(frozen=True)
class Observation:
    """One evaluated point: where, what it cost, and how many repeats went in."""

    a: AugmentedParam
    cost: float
    repeats: int = 1

    def __post_init__(self):
        if not np.isfinite(self.cost):
            raise InvalidArgumentError(f"cost must be finite, got {self.cost!r}")
        if int(self.repeats) < 1 or int(self.repeats) != self.repeats:
            raise InvalidArgumentError(f"repeats must be a positive integer, got {self.repeats!r}")
        object.__setattr__(self, "cost", float(self.cost))
        object.__setattr__(self, "repeats", int(self.repeats))


@dataclass(frozen=True)
class NoiseConfig:
    """Per-fidelity observation noise variances plus the jitter floor.

    An observation averaged over ``repeats`` rollouts carries variance
    ``noise / repeats`` on the Gram diagonal.
    """

    sim_noise_variance: float = 1e-6
    real_noise_variance: float = 4e-4
    jitter: float = 1e-9

    def __post_init__(self):
        if self.sim_noise_variance < 0 or self.real_noise_variance < 0:
            raise InvalidArgumentError("noise variances must be >= 0")
        if not (0 < self.jitter <= MAX_JITTER):
            raise InvalidArgumentError(f"jitter must lie in (0, {MAX_JITTER}], got {self.jitter}")

    def variance_for(self, delta: Fidelity) -> float:
        return self.sim_noise_variance if delta is Fidelity.SIMULATION else self.real_noise_variance


@dataclass(frozen=True)
class HyperBounds:
    """Positive search intervals per hyperparameter kind, shared by both kernel parts."""

    signal_variance: tuple[float, float] = (1e-3, 16.0)
    length_scale: tuple[float, float] = (0.03, 3.0)
    alpha: tuple[float, float] = (0.05, 25.0)

    def __post_init__(self):
        for name in ("signal_variance", "length_scale", "alpha"):
            lo, hi = getattr(self, name)
            if not (0 < lo < hi):
                raise InvalidArgumentError(f"{name} bounds must satisfy 0 < lo < hi, got ({lo}, {hi})")


@dataclass(eq=False)
class GPModel:
    """A fitted posterior: training set plus its Cholesky factorization."""

    kernel: CompositeKernelConfig
    noise: NoiseConfig
    observations: tuple[Observation, ...]
    points: tuple[AugmentedParam, ...] = field(repr=False)
    y: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)
    alpha_vec: np.ndarray = field(repr=False)
    noise_diag: np.ndarray = field(repr=False)
    effective_jitter: float = 0.0

    @property
    def n(self) -> int:
        return len(self.observations)


def _chol_with_jitter(mat: np.ndarray, jitter: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``mat + jitter*I``, escalating jitter x10 on failure."""
    n = mat.shape[0]
    current = jitter
    while current <= MAX_JITTER:
        try:
            return cholesky(mat + current * np.eye(n), lower=True), current
        except np.linalg.LinAlgError:
            current *= 10.0
    raise NumericalError(
        f"Cholesky failed for a {n}x{n} matrix even at jitter {MAX_JITTER:g}"
    )


def noise_on_diagonal(observations, noise: NoiseConfig) -> np.ndarray:
    """Per-observation noise variance: fidelity noise divided by repeats."""
    return np.array([noise.variance_for(o.a.delta) / o.repeats for o in observations])


def fit(observations, kernel: CompositeKernelConfig, noise: NoiseConfig) -> GPModel:
    """Condition the composite-kernel prior on a set of observations.

    Parameters
    ----------
    observations : sequence of Observation
        Non-empty.  Costs should already be standardized if the zero
        prior mean is to be meaningful.
    kernel, noise
        Hyperparameters; noise is fixed, never inferred.
    """
    obs = tuple(observations)
    if len(obs) == 0:
        raise InvalidArgumentError("observations must be non-empty")
    points = tuple(o.a for o in obs)
    y = np.array([o.cost for o in obs])
    diag = noise_on_diagonal(obs, noise)
    gram = kernel_matrix(points, kernel) + np.diag(diag)
    chol_l, eff = _chol_with_jitter(gram, noise.jitter)
    alpha_vec = cho_solve((chol_l, True), y)
    return GPModel(
        kernel=kernel,
        noise=noise,
        observations=obs,
        points=points,
        y=y,
        chol=chol_l,
        alpha_vec=alpha_vec,
        noise_diag=diag,
        effective_jitter=eff,
    )


def posterior_joint(model: GPModel, points) -> tuple[np.ndarray, np.ndarray]:
    """Joint posterior mean vector and covariance matrix over ``points``."""
    pts = list(points)
    k_xp = kernel_cross(model.points, pts, model.kernel)
    mean = k_xp.T @ model.alpha_vec
    v = solve_triangular(model.chol, k_xp, lower=True)
    cov = kernel_matrix(pts, model.kernel) - v.T @ v
    return mean, cov


def posterior_mean(model: GPModel, points) -> np.ndarray:
    """Posterior mean only; skips the O(m^2) covariance work."""
    k_xp = kernel_cross(model.points, list(points), model.kernel)
    return k_xp.T @ model.alpha_vec


def predict(model: GPModel, a: AugmentedParam) -> tuple[float, float]:
    """Posterior mean and variance at one augmented point.

    Variance is clamped to zero if it comes out in [-1e-10, 0) from
    rounding; anything more negative raises ``NumericalError``.
    """
    mean, cov = posterior_joint(model, [a])
    var = float(cov[0, 0])
    if var < -1e-10:
        raise NumericalError(f"posterior variance {var:g} is negative beyond tolerance")
    return float(mean[0]), max(var, 0.0)


def log_marginal_likelihood(model: GPModel) -> float:
    """Marginal log likelihood of the training costs under the model."""
    n = model.n
    fit_term = -0.5 * float(model.y @ model.alpha_vec)
    det_term = -float(np.sum(np.log(np.diag(model.chol))))
    return fit_term + det_term - 0.5 * n * math.log(2.0 * math.pi)


def sample_posterior(model: GPModel, points, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` joint posterior samples over ``points``, shape (count, m).

    Deterministic per seed.  The covariance is factorized with the same
    escalating jitter as fitting, so degenerate (observed, noiseless)
    points reproduce their observed values up to the jitter scale.
    """
    if count < 1:
        raise InvalidArgumentError(f"count must be >= 1, got {count}")
    mean, cov = posterior_joint(model, points)
    chol_l, _ = _chol_with_jitter(cov, model.noise.jitter)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((int(count), len(mean)))
    return mean + z @ chol_l.T


def standardize(costs) -> tuple[np.ndarray, float, float]:
    """Shift/scale costs to zero mean, unit spread.

    Returns the transformed values with the offset and scale; the scale
    is floored to keep degenerate (constant-cost) sets usable.
    """
    arr = np.asarray(costs, dtype=float)
    offset = float(arr.mean())
    scale = float(arr.std())
    if not scale > 1e-12:
        scale = 1.0
    return (arr - offset) / scale, offset, scale


# --------------------------------------------------------------------------
# hyperparameter fitting
# --------------------------------------------------------------------------


def _theta_to_config(theta: np.ndarray, dim: int, gain: float) -> CompositeKernelConfig:
    sv_s, ell_s, al_s = theta[0], theta[1 : 1 + dim], theta[1 + dim]
    off = dim + 2
    sv_e, ell_e, al_e = theta[off], theta[off + 1 : off + 1 + dim], theta[off + 1 + dim]
    return CompositeKernelConfig(
        sim=RQConfig(math.exp(sv_s), tuple(math.exp(v) for v in ell_s), math.exp(al_s)),
        err=RQConfig(math.exp(sv_e), tuple(math.exp(v) for v in ell_e), math.exp(al_e)),
        real_real_gain=gain,
    )


def _config_to_theta(cfg: CompositeKernelConfig) -> np.ndarray:
    parts = []
    for part in (cfg.sim, cfg.err):
        parts.append(math.log(part.signal_variance))
        parts.extend(math.log(v) for v in part.length_scales)
        parts.append(math.log(part.alpha))
    return np.array(parts)


def _log_bounds(bounds: HyperBounds, dim: int) -> tuple[np.ndarray, np.ndarray]:
    lo = [math.log(bounds.signal_variance[0])]
    lo += [math.log(bounds.length_scale[0])] * dim
    lo += [math.log(bounds.alpha[0])]
    hi = [math.log(bounds.signal_variance[1])]
    hi += [math.log(bounds.length_scale[1])] * dim
    hi += [math.log(bounds.alpha[1])]
    return np.array(lo * 2), np.array(hi * 2)


def optimize_hyperparameters(
    observations,
    bounds: HyperBounds,
    noise: NoiseConfig,
    restarts: int = 2,
    seed: int = 0,
    start: CompositeKernelConfig | None = None,
    max_iters: int = 120,
) -> CompositeKernelConfig:
    """Maximize marginal likelihood over both kernel parts.

    Runs Nelder-Mead in log space from ``restarts`` start points: the
    supplied ``start`` (or the bounds-box center) first, then seeded
    uniform draws.  The returned configuration never scores below any
    start point.  The real/real gain is kept fixed; it is redundant
    with the error signal variance.
    """
    obs = tuple(observations)
    if len(obs) == 0:
        raise InvalidArgumentError("observations must be non-empty")
    if restarts < 1:
        raise InvalidArgumentError(f"restarts must be >= 1, got {restarts}")
    dim = obs[0].a.dim
    gain = start.real_real_gain if start is not None else 1.0
    lo, hi = _log_bounds(bounds, dim)

    def objective(theta: np.ndarray) -> float:
        clipped = np.clip(theta, lo, hi)
        overshoot = float(np.sum((theta - clipped) ** 2))
        try:
            model = fit(obs, _theta_to_config(clipped, dim, gain), noise)
            value = -log_marginal_likelihood(model)
        except NumericalError:
            return 1e12
        return value + 1e3 * overshoot

    center = 0.5 * (lo + hi)
    starts = [np.clip(_config_to_theta(start), lo, hi) if start is not None else center]
    rng = np.random.default_rng(seed)
    while len(starts) < restarts:
        starts.append(lo + rng.uniform(size=lo.shape) * (hi - lo))

    from .optimizer import nelder_mead  # deferred: optimizer imports gp at module load

    best_theta, best_val = None, math.inf
    for theta0 in starts:
        val0 = objective(theta0)
        if val0 < best_val:
            best_theta, best_val = theta0, val0
        x_opt, f_opt, _ = nelder_mead(objective, theta0, init_scale=0.5, tolerance=1e-6, max_iters=max_iters)
        if f_opt < best_val:
            best_theta, best_val = x_opt, f_opt
    return _theta_to_config(np.clip(best_theta, lo, hi), dim, gain)
