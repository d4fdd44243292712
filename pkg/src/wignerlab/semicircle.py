"""Closed-form analytics of the semicircle distribution on [-2, 2].

Density g(x) = sqrt((4 - x^2)_+) / (2 pi), its CDF, its Stieltjes
transform m(z) for Im z > 0, the edge factor b(z) = z + 2 m(z)
(= sqrt(z^2 - 4) on the correct branch), the edge distance
kappa(u) = ||u| - 2|, and the n-quantile grid.

All functions are pure and stateless; safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

__all__ = [
    "SpectralPoint",
    "SpectralDomain",
    "SemicircleQuantiles",
    "density",
    "cdf",
    "stieltjes",
    "edge_factor",
    "edge_distance",
    "quantiles",
]

QUANTILE_TOL = 1e-12


@dataclass(frozen=True)
class SpectralPoint:
    """A point z = u + iv of the upper half plane, v > 0 strictly."""

    u: float
    v: float

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError(f"spectral resolution v must be positive, got {self.v}")

    @property
    def z(self) -> complex:
        return complex(self.u, self.v)


@dataclass(frozen=True)
class SpectralDomain:
    """Rectangle |u| <= u_0, v_0 <= v <= V with v_0 = A_0 * log(n)^alpha / n.

    ``log_base`` sets the logarithm used by the resolution rule; desk-scale
    defaults use base 10 (see experiments.Constants).
    """

    u_0: float
    V: float
    A_0: float
    alpha: int
    n: int
    log_base: float = 10.0

    def __post_init__(self):
        if self.u_0 <= 0 or self.V <= 0 or self.A_0 <= 0:
            raise ValueError("u_0, V, A_0 must be positive")
        if self.alpha not in (1, 2):
            raise ValueError(f"alpha must be 1 or 2, got {self.alpha}")
        if self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.v_0 > self.V:
            raise ValueError(
                f"empty domain: v_0 = {self.v_0:.4g} exceeds V = {self.V:.4g}"
            )

    @property
    def v_0(self) -> float:
        return self.A_0 * math.log(self.n, self.log_base) ** self.alpha / self.n

    def v_grid(self, points_per_decade: int = 8) -> np.ndarray:
        """Geometric v grid from V down to v_0, descending."""
        if self.v_0 <= 0:
            raise ValueError("v grid needs v_0 > 0 (n >= 2)")
        decades = math.log10(self.V / self.v_0)
        count = max(2, int(math.ceil(decades * points_per_decade)) + 1)
        return np.geomspace(self.V, self.v_0, count)

    def grid(self, u_list, points_per_decade: int = 8) -> list[SpectralPoint]:
        pts = []
        for u in u_list:
            if abs(u) > self.u_0:
                raise ValueError(f"|u| = {abs(u)} exceeds u_0 = {self.u_0}")
            for v in self.v_grid(points_per_decade):
                pts.append(SpectralPoint(float(u), float(v)))
        return pts


def density(x):
    """Semicircle density sqrt((4 - x^2)_+) / (2 pi); vanishes off [-2, 2]."""
    x = np.asarray(x, dtype=float)
    out = np.sqrt(np.maximum(4.0 - x * x, 0.0)) / (2.0 * np.pi)
    return out if out.ndim else float(out)


def cdf(x):
    """Closed-form semicircle CDF: 1/2 + x sqrt(4-x^2)/(4 pi) + arcsin(x/2)/pi."""
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, -2.0, 2.0)
    out = 0.5 + xc * np.sqrt(4.0 - xc * xc) / (4.0 * np.pi) + np.arcsin(xc / 2.0) / np.pi
    out = np.where(x <= -2.0, 0.0, np.where(x >= 2.0, 1.0, out))
    return out if out.ndim else float(out)


def stieltjes(z) -> complex:
    """Stieltjes transform of the semicircle law for Im z > 0.

    Returns the root of m^2 + z m + 1 = 0 with positive imaginary part,
    which coincides with the integral of g(x)/(x - z).  Computed from the
    larger root to avoid cancellation, using that the two roots multiply
    to 1.
    """
    if isinstance(z, SpectralPoint):
        z = z.z
    z = complex(z)
    if z.imag <= 0:
        raise ValueError(f"stieltjes requires Im z > 0, got {z}")
    w = np.sqrt(complex(z * z - 4.0))
    # pick the sign making -z -/+ w large, then invert (product of roots = 1)
    if (z.conjugate() * w).real > 0:
        big = (-z - w) / 2.0
    else:
        big = (-z + w) / 2.0
    m = 1.0 / big
    if m.imag <= 0:
        m = big  # fall back: exactly one root has Im > 0 for Im z > 0
    return m


def edge_factor(z) -> complex:
    """b(z) = z + 2 m(z); satisfies b^2 = z^2 - 4 with Im b > 0."""
    if isinstance(z, SpectralPoint):
        z = z.z
    return complex(z) + 2.0 * stieltjes(z)


def edge_distance(u: float) -> float:
    """Distance ||u| - 2| of the energy u to the spectral edge."""
    return abs(abs(float(u)) - 2.0)


@dataclass(frozen=True)
class SemicircleQuantiles:
    """Classical eigenvalue locations: cdf(gamma[j-1]) = j/n, ascending."""

    n: int
    gamma: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if len(self.gamma) != self.n:
            raise ValueError("quantile array length must equal n")


def quantiles(n: int) -> SemicircleQuantiles:
    """Solve cdf(gamma_j) = j/n, j = 1..n, by bracketed bisection.

    The last quantile is pinned to 2 exactly; interior solves are seeded by
    the edge asymptotic (3 pi j / (2 n))^(2/3) - 2 and refined to
    QUANTILE_TOL absolute tolerance.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gamma = np.empty(n)
    gamma[-1] = 2.0
    for j in range(1, n):
        target = j / n
        lo, hi = -2.0, 2.0
        # edge-asymptotic seed brackets the root tightly for extreme j
        seed = (1.5 * np.pi * target) ** (2.0 / 3.0) - 2.0
        if -2.0 < seed < 2.0:
            if cdf(seed) >= target:
                hi = seed
            else:
                lo = seed
        gamma[j - 1] = optimize.brentq(
            lambda x: cdf(x) - target, lo, hi, xtol=QUANTILE_TOL
        )
    if np.any(np.diff(gamma) < 0):
        raise RuntimeError("quantile grid is not nondecreasing")
    return SemicircleQuantiles(n=n, gamma=gamma)
