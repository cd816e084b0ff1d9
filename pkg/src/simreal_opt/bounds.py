"""Axis-aligned search boxes and [0,1]^D coordinate mapping.

Kernels and the acquisition grid always work in the unit cube; physical
gain values only appear at the evaluation and reporting edges.  This
module owns the mapping between the two.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class Box:
    """Rectangular domain given by per-dimension lower/upper edges."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
            raise InvalidArgumentError(
                f"bounds must be matching 1-d tuples, got {self.lower!r}/{self.upper!r}"
            )
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise InvalidArgumentError("bounds must be finite")
        if np.any(hi <= lo):
            raise InvalidArgumentError(f"upper must exceed lower, got {self.lower!r}/{self.upper!r}")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in hi))

    @property
    def dim(self) -> int:
        return len(self.lower)

    @staticmethod
    def unit(dim: int) -> "Box":
        return Box((0.0,) * dim, (1.0,) * dim)

    def to_unit(self, x) -> np.ndarray:
        """Map physical coordinates into [0,1]^D."""
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return (np.asarray(x, dtype=float) - lo) / (hi - lo)

    def from_unit(self, u) -> np.ndarray:
        """Map unit-cube coordinates back to physical values."""
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return lo + np.asarray(u, dtype=float) * (hi - lo)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))
