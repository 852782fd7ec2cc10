"""Domain types and closed-form seed functions for the varying-rate parking model.

Cars are open unit intervals dropped on (0, x); the left endpoint of each car
follows a truncated exponential law with rate ``lam`` on the free gap.  The
mean count of cars at saturation is known in closed form up to x = 3, and the
process obeys hard counting bounds (at saturation every gap is at most one
car length, so ceil((x-1)/2) <= count <= floor(x)).  Everything past x = 3 is
produced by the steppers in :mod:`parklab.solver`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "DomainError",
    "Params",
    "Bracket",
    "SegmentedGrid",
    "ConstantsReport",
    "GRID_KINDS",
    "UNIFORM_RATE_CUTOFF",
    "truncated_exp_pdf",
    "mean_closed",
    "mean_derivative_closed",
    "upper_count_bound",
    "lower_count_bound",
]


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


GRID_KINDS = ("M", "Mprime", "M2", "uniformMprime")

# Below this rate the placement law is numerically indistinguishable from
# uniform; solvers switch to the uniform-limit equations and flag it.
UNIFORM_RATE_CUTOFF = 1e-6


@dataclass(frozen=True)
class Params:
    """Validated solver inputs.

    lam          placement rate (> 0, per unit length)
    horizon_n    number of unit segments to solve, >= 3
    resolution_m subintervals per unit segment, even and >= 2
    """

    lam: float
    horizon_n: int = 7
    resolution_m: int = 256

    def __post_init__(self) -> None:
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"rate lam must be finite and > 0, got {self.lam!r}")
        if not (isinstance(self.horizon_n, int) and self.horizon_n >= 3):
            raise DomainError(f"horizon_n must be an integer >= 3, got {self.horizon_n!r}")
        m = self.resolution_m
        if not (isinstance(m, int) and m >= 2 and m % 2 == 0):
            raise DomainError(f"resolution_m must be an even integer >= 2, got {m!r}")


@dataclass(frozen=True)
class Bracket:
    """Certified enclosure [lo, hi] of a scalar."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise DomainError(f"bracket endpoints must be finite, got [{self.lo}, {self.hi}]")
        if self.lo > self.hi:
            raise DomainError(f"bracket endpoints out of order: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lo - slack <= value <= self.hi + slack


@dataclass(frozen=True)
class SegmentedGrid:
    """Piecewise-smooth tabulation on [0, n] with one row per unit segment.

    Row k holds m+1 samples of the function's smooth extension to the closed
    segment [k, k+1], so jump discontinuities at integers live between rows
    and quadrature never straddles one.  Rows of adjacent segments agree at
    the shared integer abscissa except at the genuine jumps (x = 1 for the
    mean and second moment, x = 2 for the mean derivative).
    """

    kind: str
    values: np.ndarray
    lam: Optional[float] = None
    uniform_substituted: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in GRID_KINDS:
            raise DomainError(f"unknown grid kind {self.kind!r}")
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 3:
            raise DomainError(f"values must be (segments, m+1) with m >= 2, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("grid contains non-finite values")
        if self.kind == "uniformMprime":
            if self.lam is not None:
                raise DomainError("uniform grids carry no rate")
        elif self.lam is None or not (self.lam > 0):
            raise DomainError(f"grid of kind {self.kind!r} needs a positive rate")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def horizon_n(self) -> int:
        return self.values.shape[0]

    @property
    def resolution_m(self) -> int:
        return self.values.shape[1] - 1

    @property
    def h(self) -> float:
        return 1.0 / self.resolution_m

    def segment(self, k: int) -> np.ndarray:
        return self.values[k]

    def x_nodes(self, k: int) -> np.ndarray:
        """Abscissae of segment k's samples."""
        m = self.resolution_m
        return k + np.arange(m + 1) / m

    def value(self, x: float, side: str = "left") -> float:
        """Evaluate at x in [0, horizon].

        At interior integer abscissae ``side`` selects which segment's
        extension to read; "left" returns the actual function value for the
        left-continuous grids produced here.
        """
        n, m = self.horizon_n, self.resolution_m
        if not (0.0 <= x <= n):
            raise DomainError(f"x={x} outside grid range [0, {n}]")
        if side not in ("left", "right"):
            raise DomainError(f"side must be 'left' or 'right', got {side!r}")
        k = int(math.floor(x))
        if x == k and ((side == "left" and k > 0) or k == n):
            return float(self.values[k - 1, m])
        off = (x - k) * m
        j = int(round(off))
        if abs(off - j) < 1e-9 * m:
            return float(self.values[k, j])
        return float(_interp_segment(self.values[k], np.array([off]))[0])


def _interp_segment(seg: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Local polynomial interpolation at fractional node offsets (units of h).

    Cubic through the four nearest nodes, clamped to the segment; quadratic
    when the segment has only three samples.  Exact at the nodes.
    """
    m = seg.size - 1
    if m < 3:
        jb = np.clip(np.floor(offsets).astype(int) - 1, 0, m - 2)
        xi = offsets - jb
        l0 = 0.5 * (xi - 1.0) * (xi - 2.0)
        l1 = -xi * (xi - 2.0)
        l2 = 0.5 * xi * (xi - 1.0)
        return seg[jb] * l0 + seg[jb + 1] * l1 + seg[jb + 2] * l2
    jb = np.clip(np.floor(offsets).astype(int) - 1, 0, m - 3)
    xi = offsets - jb
    l0 = -(xi - 1.0) * (xi - 2.0) * (xi - 3.0) / 6.0
    l1 = xi * (xi - 2.0) * (xi - 3.0) / 2.0
    l2 = -xi * (xi - 1.0) * (xi - 3.0) / 2.0
    l3 = xi * (xi - 1.0) * (xi - 2.0) / 6.0
    return seg[jb] * l0 + seg[jb + 1] * l1 + seg[jb + 2] * l2 + seg[jb + 3] * l3


@dataclass(frozen=True)
class ConstantsReport:
    """Brackets for the three asymptotic constants plus method metadata.

    c brackets the packing density (mean count / length), b the additive
    intercept of the mean, d the slope of the variance.  envelope_inf and
    envelope_sup are the derivative window extrema used by the envelope tail
    method; uniform_fallback marks reports where the rate was below
    UNIFORM_RATE_CUTOFF and the uniform-limit equations were solved instead.
    """

    lam: float
    horizon_n: int
    resolution_m: int
    tail_method: str
    c: Bracket
    b: Bracket
    d: Bracket
    envelope_inf: Optional[float] = None
    envelope_sup: Optional[float] = None
    quadrature_halving_delta: Optional[float] = None
    uniform_fallback: bool = False

    def __post_init__(self) -> None:
        if self.tail_method not in ("crude", "envelope"):
            raise DomainError(f"unknown tail method {self.tail_method!r}")
        if self.tail_method == "envelope":
            if self.envelope_inf is None or self.envelope_sup is None:
                raise DomainError("envelope reports need envelope_inf and envelope_sup")
            if self.envelope_inf > self.envelope_sup:
                raise DomainError("envelope_inf must not exceed envelope_sup")

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "n": self.horizon_n,
            "m": self.resolution_m,
            "tail_method": self.tail_method,
            "c_lo": self.c.lo,
            "c_hi": self.c.hi,
            "b_lo": self.b.lo,
            "b_hi": self.b.hi,
            "d_lo": self.d.lo,
            "d_hi": self.d.hi,
            "envelope_inf": self.envelope_inf,
            "envelope_sup": self.envelope_sup,
            "quadrature_halving_delta": self.quadrature_halving_delta,
            "uniform_fallback": self.uniform_fallback,
        }


def truncated_exp_pdf(t: float, lam: float, x: float) -> float:
    """Density of a car's left endpoint on a free stretch of length x.

    Support is (0, x-1); the mass lam*exp(-lam*t) is renormalized to the
    admissible placements.  Returns 0 off the support.
    """
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError(f"rate must be finite and > 0, got {lam!r}")
    if not (math.isfinite(x) and x > 1):
        raise DomainError(f"stretch length must exceed 1, got {x!r}")
    if t <= 0.0 or t >= x - 1.0:
        return 0.0
    return lam * math.exp(-lam * t) / -math.expm1(-lam * (x - 1.0))


def mean_closed(x: float, lam: float) -> float:
    """Mean saturation count on [0, 3], where the stepping recursion is explicit.

    0 up to one car length, exactly 1 on (1, 2], and on (2, 3] the two-car
    probability enters through a ratio of exponential masses.  Continuous
    except for the unit jump at x = 1; equals 2 at x = 3 by cancellation.
    """
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError(f"rate must be finite and > 0, got {lam!r}")
    if not (0.0 <= x <= 3.0):
        raise DomainError(f"closed form only valid on [0, 3], got x={x!r}")
    if x <= 1.0:
        return 0.0
    if x <= 2.0:
        return 1.0
    num = (1.0 + math.exp(-lam)) * -math.expm1(-lam * (x - 2.0))
    den = -math.expm1(-lam * (x - 1.0))
    return 1.0 + num / den


def mean_derivative_closed(x: float, lam: float, from_right: bool = False) -> float:
    """Derivative of the mean count on (0, 3].

    Zero below x = 2 away from the jumps; on (2, 3] it decays from its
    right-limit value at 2.  x = 1 and x = 2 are jump points and are only
    evaluated when ``from_right`` requests the right limit.
    """
    if not (math.isfinite(lam) and lam > 0):
        raise DomainError(f"rate must be finite and > 0, got {lam!r}")
    if not (0.0 < x <= 3.0):
        raise DomainError(f"closed form only valid on (0, 3], got x={x!r}")
    if x == 1.0 or x == 2.0:
        if not from_right:
            raise DomainError(f"x={x} is a jump point; pass from_right=True for the right limit")
        if x == 1.0:
            return 0.0
        return _mean_derivative_tail(2.0, lam)
    if x < 2.0:
        return 0.0
    return _mean_derivative_tail(x, lam)


def _mean_derivative_tail(x: float, lam: float) -> float:
    # lam*sinh(lam) / (cosh(lam*(x-1)) - 1) rewritten so every exponential
    # has a nonpositive argument; stable for lam from 1e-300 up to ~700.
    y = x - 1.0
    return lam * math.exp(lam * (1.0 - y)) * -math.expm1(-2.0 * lam) / math.expm1(-lam * y) ** 2


def upper_count_bound(x: float) -> int:
    """Cars at saturation never exceed floor(x); valid for x >= 0."""
    return math.floor(x)


def lower_count_bound(x: float) -> int:
    """At saturation no gap exceeds 1, forcing at least ceil((x-1)/2) cars.

    Clamped to 0 below one car length so the bound reads cleanly for all
    x >= 0.
    """
    return max(0, math.ceil((x - 1.0) / 2.0))
