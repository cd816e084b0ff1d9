"""Covariance functions over fidelity-augmented gain vectors.

A query point is a pair ``a = (x, delta)`` of a gain vector ``x`` in the
unit cube and a fidelity flag ``delta``.  The covariance between two
points is

    k(a_i, a_j) = k_sim(x_i, x_j) + k_delta(d_i, d_j) * k_err(x_i, x_j)

where ``k_sim`` and ``k_err`` are rational-quadratic kernels with ARD
length scales and ``k_delta`` gates the error term: it is nonzero only
when both points are real-world evaluations.  Real observations thereby
inform a correction on top of the shared simulation surrogate, while
simulated observations never touch the error term.

All kernels expect coordinates already mapped to [0,1]^D; callers own
the bounds mapping (see :mod:`simreal_opt.bounds`).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError


class Fidelity(enum.Enum):
    SIMULATION = "sim"
    REAL = "real"


@dataclass(frozen=True)
class AugmentedParam:
    """A gain vector tagged with the fidelity it was (or will be) run at."""

    x: tuple[float, ...]
    delta: Fidelity

    def __post_init__(self):
        if not isinstance(self.delta, Fidelity):
            raise InvalidArgumentError(f"delta must be a Fidelity, got {self.delta!r}")
        xs = tuple(float(v) for v in self.x)
        if len(xs) == 0 or not all(np.isfinite(v) for v in xs):
            raise InvalidArgumentError(f"x must be a non-empty finite vector, got {self.x!r}")
        object.__setattr__(self, "x", xs)

    @property
    def dim(self) -> int:
        return len(self.x)


def aug(x, delta: Fidelity) -> AugmentedParam:
    """Convenience constructor accepting any array-like ``x``."""
    return AugmentedParam(tuple(float(v) for v in np.atleast_1d(np.asarray(x, dtype=float))), delta)


@dataclass(frozen=True)
class RQConfig:
    """Rational-quadratic kernel hyperparameters.

    Parameters
    ----------
    signal_variance : float
        Prior variance sigma^2, > 0.
    length_scales : tuple of float
        One ARD length scale per input dimension, all > 0.
    alpha : float
        Shape parameter, > 0.  The kernel approaches a squared
        exponential as ``alpha`` grows.
    """

    signal_variance: float = 1.0
    length_scales: tuple[float, ...] = (0.3, 0.3)
    alpha: float = 2.0

    def __post_init__(self):
        ls = tuple(float(v) for v in self.length_scales)
        object.__setattr__(self, "length_scales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "alpha", float(self.alpha))
        if not (self.signal_variance > 0 and np.isfinite(self.signal_variance)):
            raise InvalidArgumentError(f"signal_variance must be > 0, got {self.signal_variance}")
        if len(ls) == 0 or any(not (l > 0 and np.isfinite(l)) for l in ls):
            raise InvalidArgumentError(f"length_scales must all be > 0, got {self.length_scales}")
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise InvalidArgumentError(f"alpha must be > 0, got {self.alpha}")

    @property
    def dim(self) -> int:
        return len(self.length_scales)


@dataclass(frozen=True)
class CompositeKernelConfig:
    """Hyperparameters of the two-part fidelity kernel."""

    sim: RQConfig = field(default_factory=RQConfig)
    err: RQConfig = field(default_factory=lambda: RQConfig(signal_variance=0.3, length_scales=(0.5, 0.5)))
    real_real_gain: float = 1.0

    def __post_init__(self):
        if self.sim.dim != self.err.dim:
            raise InvalidArgumentError(
                f"sim and err kernels disagree on dimension: {self.sim.dim} vs {self.err.dim}"
            )
        if not (self.real_real_gain >= 0 and np.isfinite(self.real_real_gain)):
            raise InvalidArgumentError(f"real_real_gain must be >= 0, got {self.real_real_gain}")

    @property
    def dim(self) -> int:
        return self.sim.dim


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


def _scaled_sqdist(xa: np.ndarray, xb: np.ndarray, length_scales) -> np.ndarray:
    """Pairwise sum of squared per-dimension distances after ARD scaling."""
    ell = np.asarray(length_scales, dtype=float)
    diff = (xa[:, None, :] - xb[None, :, :]) / ell
    return np.einsum("ijk,ijk->ij", diff, diff)


def _rq(r2: np.ndarray, cfg: RQConfig) -> np.ndarray:
    # exp/log1p form stays accurate for very large alpha (SE limit).
    return cfg.signal_variance * np.exp(-cfg.alpha * np.log1p(r2 / (2.0 * cfg.alpha)))


def rq_kernel(xi, xj, cfg: RQConfig) -> float:
    """Rational-quadratic covariance between two coordinate vectors.

    k = sigma^2 * (1 + r^2 / (2 alpha))^(-alpha) with
    r^2 = sum_d ((xi_d - xj_d) / ell_d)^2.
    """
    a = np.atleast_2d(np.asarray(xi, dtype=float))
    b = np.atleast_2d(np.asarray(xj, dtype=float))
    if a.shape[1] != cfg.dim or b.shape[1] != cfg.dim:
        raise InvalidArgumentError(
            f"input dimension {a.shape[1]}/{b.shape[1]} does not match kernel dimension {cfg.dim}"
        )
    return float(_rq(_scaled_sqdist(a, b, cfg.length_scales), cfg)[0, 0])


def delta_kernel(di: Fidelity, dj: Fidelity, gain: float = 1.0) -> float:
    """Fidelity gate: ``gain`` iff both points are real, else 0."""
    return float(gain) if (di is Fidelity.REAL and dj is Fidelity.REAL) else 0.0


def composite_kernel(ai: AugmentedParam, aj: AugmentedParam, cfg: CompositeKernelConfig) -> float:
    """Covariance between two augmented points (see module docstring)."""
    if ai.dim != aj.dim or ai.dim != cfg.dim:
        raise InvalidArgumentError(
            f"point dimensions {ai.dim}/{aj.dim} do not match kernel dimension {cfg.dim}"
        )
    k = rq_kernel(ai.x, aj.x, cfg.sim)
    gate = delta_kernel(ai.delta, aj.delta, cfg.real_real_gain)
    # gate * rq == 0.0 exactly when the gate is closed, so the scalar and
    # matrix paths agree bit for bit.
    return k + gate * rq_kernel(ai.x, aj.x, cfg.err)


def _split(points) -> tuple[np.ndarray, np.ndarray]:
    pts = list(points)
    if len(pts) == 0:
        raise InvalidArgumentError("points must be non-empty")
    dim = pts[0].dim
    if any(p.dim != dim for p in pts):
        raise InvalidArgumentError("all points must share one dimension")
    x = np.array([p.x for p in pts], dtype=float)
    is_real = np.array([p.delta is Fidelity.REAL for p in pts], dtype=float)
    return x, is_real


def kernel_cross(points_a, points_b, cfg: CompositeKernelConfig) -> np.ndarray:
    """Covariance matrix between two point lists, shape (len(a), len(b))."""
    xa, ra = _split(points_a)
    xb, rb = _split(points_b)
    if xa.shape[1] != cfg.dim:
        raise InvalidArgumentError(
            f"point dimension {xa.shape[1]} does not match kernel dimension {cfg.dim}"
        )
    k = _rq(_scaled_sqdist(xa, xb, cfg.sim.length_scales), cfg.sim)
    gate = cfg.real_real_gain * np.outer(ra, rb)
    return k + gate * _rq(_scaled_sqdist(xa, xb, cfg.err.length_scales), cfg.err)


def kernel_matrix(points, cfg: CompositeKernelConfig) -> np.ndarray:
    """Square covariance matrix over one point list.

    Exactly symmetric by construction: entry (i, j) and entry (j, i) are
    computed from the same elementwise squares, and the matrix equals
    the scalar ``composite_kernel`` at every pair.
    """
    return kernel_cross(points, points, cfg)
