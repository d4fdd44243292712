"""Seeded Wigner-matrix generation and entry-law analytics.

Entry laws are standardized to mean 0, variance 1 with a finite,
closed-form fourth moment.  Matrices are real symmetric with i.i.d.
upper-triangle entries; each cell (j, k), j <= k, draws from its own
counter-based substream so identical (law, n, seed) reproduce identical
matrices bit-for-bit regardless of execution order.

Also provides the two-sided conditioning split (entries below / above the
n^(1/4) R_under threshold) and bounded discrete laws matching a target's
first four moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from . import _rng

__all__ = [
    "EntryLaw",
    "SymmetricMatrixSample",
    "ConditionedLaw",
    "MatchedBoundedLaw",
    "MomentMatchError",
    "RejectionCapError",
    "gaussian",
    "rademacher",
    "student_t",
    "symmetric_pareto",
    "discrete_atoms",
    "law_moments",
    "law_tail",
    "law_truncated_moment",
    "sample_wigner",
    "conditional_laws",
    "match_bounded",
]

REJECTION_CAP = 10 ** 6
_STANDARDIZE_TOL = 1e-9


class MomentMatchError(ValueError):
    """Raised when no bounded <=3-atom law can match the requested moments."""


class RejectionCapError(RuntimeError):
    """Raised when rejection sampling exhausts its iteration budget."""


@dataclass(frozen=True)
class EntryLaw:
    """A standardized matrix-entry distribution (mean 0, variance 1).

    Variants: ``gaussian``, ``rademacher``, ``student-t`` (nu > 4),
    ``symmetric-pareto`` (alpha > 4), ``atoms`` (explicit standardized
    discrete law).  Use the module factory functions to construct.
    """

    variant: str
    nu: float | None = None
    alpha: float | None = None
    atoms: tuple[tuple[float, float], ...] | None = None

    @property
    def label(self) -> str:
        if self.variant == "student-t":
            return f"student-t({self.nu:g})"
        if self.variant == "symmetric-pareto":
            return f"symmetric-pareto({self.alpha:g})"
        if self.variant == "atoms":
            return f"atoms[{len(self.atoms)}]"
        return self.variant


def gaussian() -> EntryLaw:
    return EntryLaw("gaussian")


def rademacher() -> EntryLaw:
    return EntryLaw("rademacher")


def student_t(nu: float) -> EntryLaw:
    """Student-t with nu > 4 degrees of freedom, scaled to unit variance."""
    if not nu > 4:
        raise ValueError(f"student-t entry law requires nu > 4, got {nu}")
    return EntryLaw("student-t", nu=float(nu))


def symmetric_pareto(alpha: float) -> EntryLaw:
    """Symmetric Pareto (density ~ |x|^-(alpha+1)), alpha > 4, unit variance."""
    if not alpha > 4:
        raise ValueError(f"symmetric pareto requires alpha > 4, got {alpha}")
    return EntryLaw("symmetric-pareto", alpha=float(alpha))


def discrete_atoms(atoms) -> EntryLaw:
    """Discrete law from (value, probability) pairs; must be standardized."""
    atoms = tuple((float(v), float(p)) for v, p in atoms)
    probs = np.array([p for _, p in atoms])
    vals = np.array([v for v, _ in atoms])
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > _STANDARDIZE_TOL:
        raise ValueError("atom probabilities must be nonnegative and sum to 1")
    m1 = float(vals @ probs)
    m2 = float((vals ** 2) @ probs)
    if abs(m1) > _STANDARDIZE_TOL or abs(m2 - 1.0) > _STANDARDIZE_TOL:
        raise ValueError(
            f"atoms must give mean 0 and variance 1 (got mean {m1:.3g}, "
            f"second moment {m2:.6g})"
        )
    return EntryLaw("atoms", atoms=atoms)


def _t_scale(nu: float) -> float:
    return math.sqrt(nu / (nu - 2.0))


def _pareto_scale(alpha: float) -> float:
    return math.sqrt(alpha / (alpha - 2.0))


def law_moments(law: EntryLaw) -> tuple[float, float, float, float]:
    """First four moments (m1, m2, m3, m4), closed form per variant."""
    if law.variant == "gaussian":
        return (0.0, 1.0, 0.0, 3.0)
    if law.variant == "rademacher":
        return (0.0, 1.0, 0.0, 1.0)
    if law.variant == "student-t":
        nu = law.nu
        return (0.0, 1.0, 0.0, 3.0 * (nu - 2.0) / (nu - 4.0))
    if law.variant == "symmetric-pareto":
        a = law.alpha
        return (0.0, 1.0, 0.0, (a - 2.0) ** 2 / (a * (a - 4.0)))
    if law.variant == "atoms":
        vals = np.array([v for v, _ in law.atoms])
        probs = np.array([p for _, p in law.atoms])
        return tuple(float((vals ** s) @ probs) for s in (1, 2, 3, 4))
    raise ValueError(f"unknown law variant {law.variant!r}")


def law_density(law: EntryLaw, x):
    """Density of the standardized law (continuous variants only)."""
    x = np.asarray(x, dtype=float)
    if law.variant == "gaussian":
        return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if law.variant == "student-t":
        s = _t_scale(law.nu)
        from scipy.stats import t as _t

        return _t.pdf(x * s, law.nu) * s
    if law.variant == "symmetric-pareto":
        s = _pareto_scale(law.alpha)
        y = np.abs(x) * s
        out = np.where(y >= 1.0, 0.5 * law.alpha * y ** (-law.alpha - 1.0), 0.0)
        return out * s
    raise ValueError(f"{law.variant} has no density")


def law_tail(law: EntryLaw, t: float) -> float:
    """P(|X| > t) for the standardized law."""
    t = float(t)
    if t < 0:
        return 1.0
    if law.variant == "gaussian":
        return float(special.erfc(t / math.sqrt(2.0)))
    if law.variant == "rademacher":
        return 1.0 if t < 1.0 else 0.0
    if law.variant == "student-t":
        return float(2.0 * special.stdtr(law.nu, -t * _t_scale(law.nu)))
    if law.variant == "symmetric-pareto":
        y = t * _pareto_scale(law.alpha)
        return 1.0 if y <= 1.0 else float(y ** -law.alpha)
    if law.variant == "atoms":
        return float(sum(p for v, p in law.atoms if abs(v) > t))
    raise ValueError(f"unknown law variant {law.variant!r}")


def law_truncated_moment(law: EntryLaw, order: int, bound: float) -> float:
    """E[X^order 1(|X| <= bound)], closed form or adaptive quadrature."""
    a = float(bound)
    if a <= 0:
        return 0.0
    if law.variant == "rademacher":
        if a < 1.0:
            return 0.0
        return 0.0 if order % 2 else 1.0
    if law.variant == "atoms":
        return float(sum(p * v ** order for v, p in law.atoms if abs(v) <= a))
    if law.variant == "symmetric-pareto":
        if order % 2:
            return 0.0
        alpha = law.alpha
        s = _pareto_scale(alpha)
        y = a * s
        if y <= 1.0:
            return 0.0
        # E[Y^order 1(1 <= Y <= y)] with Y raw pareto, then unscale
        k = alpha / (alpha - order)
        raw = k * (1.0 - y ** (order - alpha))
        return raw / s ** order
    if order % 2 and law.variant in ("gaussian", "student-t"):
        return 0.0
    val, err = integrate.quad(
        lambda x: x ** order * law_density(law, x), 0.0, a, limit=200
    )
    return 2.0 * val  # symmetric integrand, even order


def _sample_from_uniforms(law: EntryLaw, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF map from uniforms in (0,1) to standardized variates."""
    if law.variant == "gaussian":
        return special.ndtri(u)
    if law.variant == "rademacher":
        return np.where(u < 0.5, -1.0, 1.0)
    if law.variant == "student-t":
        return special.stdtrit(law.nu, u) / _t_scale(law.nu)
    if law.variant == "symmetric-pareto":
        sign = np.where(u < 0.5, -1.0, 1.0)
        w = 2.0 * np.abs(u - 0.5)  # uniform in [0, 1)
        return sign * (1.0 - w) ** (-1.0 / law.alpha) / _pareto_scale(law.alpha)
    if law.variant == "atoms":
        vals = np.array([v for v, _ in law.atoms])
        cum = np.cumsum([p for _, p in law.atoms])
        return vals[np.searchsorted(cum, u, side="right").clip(0, len(vals) - 1)]
    raise ValueError(f"unknown law variant {law.variant!r}")


@dataclass(frozen=True)
class SymmetricMatrixSample:
    """Raw n x n symmetric matrix X (unscaled) with its provenance."""

    n: int
    entries: np.ndarray = field(repr=False)
    law: EntryLaw
    seed: int

    @property
    def scaled(self) -> np.ndarray:
        """W = X / sqrt(n)."""
        return self.entries / math.sqrt(self.n)


def _triu_cells(n: int):
    rows, cols = np.triu_indices(n)
    return rows, cols


def _mirror(n: int, rows, cols, values) -> np.ndarray:
    X = np.zeros((n, n))
    X[rows, cols] = values
    X[cols, rows] = values
    return X


def sample_wigner(law: EntryLaw, n: int, seed: int) -> SymmetricMatrixSample:
    """Draw a symmetric matrix with i.i.d. law entries on the upper triangle."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rows, cols = _triu_cells(n)
    keys = _rng.cell_keys(seed, rows, cols)
    u = _rng.uniforms(keys, 0)
    vals = _sample_from_uniforms(law, u)
    return SymmetricMatrixSample(n=n, entries=_mirror(n, rows, cols, vals), law=law, seed=int(seed))


@dataclass(frozen=True)
class ConditionedLaw:
    """A base law conditioned on lo < |X| <= hi (or |X| <= hi when lo = 0)."""

    base: EntryLaw
    lo: float
    hi: float
    mass: float

    def moment(self, order: int) -> float:
        num = law_truncated_moment(self.base, order, self.hi) - law_truncated_moment(
            self.base, order, self.lo
        )
        return num / self.mass

    def moments(self) -> tuple[float, float, float, float]:
        return tuple(self.moment(s) for s in (1, 2, 3, 4))

    def contains(self, x: np.ndarray) -> np.ndarray:
        ax = np.abs(x)
        if self.lo == 0.0:
            return ax <= self.hi
        return (ax > self.lo) & (ax <= self.hi)

    def sample_cells(self, keys: np.ndarray, start_index: int = 0) -> np.ndarray:
        """Rejection-sample one conditioned draw per substream key."""
        keys = np.asarray(keys, dtype=np.uint64)
        out = np.empty(keys.shape, dtype=float)
        pending = np.ones(keys.shape, dtype=bool)
        t = np.full(keys.shape, start_index, dtype=np.uint64)
        iterations = 0
        while pending.any():
            if iterations >= REJECTION_CAP:
                raise RejectionCapError(
                    f"conditioned law (lo={self.lo:.4g}, hi={self.hi:.4g}, "
                    f"mass={self.mass:.3g}) exceeded {REJECTION_CAP} rejection rounds"
                )
            u = _rng.uniforms(keys[pending], t[pending])
            x = _sample_from_uniforms(self.base, u)
            ok = self.contains(x)
            idx = np.flatnonzero(pending)
            out[idx[ok]] = x[ok]
            pending[idx[ok]] = False
            t[idx[~ok]] += np.uint64(1)
            iterations += 1
        return out


def conditional_laws(
    law: EntryLaw, n: int, R_under: float, R_over: float
) -> tuple[ConditionedLaw, ConditionedLaw | None, float]:
    """Split a law at the small/large threshold a = n^(1/4) R_under.

    Returns (small law on |X| <= a, large law on a < |X| <= b with
    b = sqrt(n)/R_over, annulus mass p_n).  The large law is None when
    p_n = 0; callers must then treat every cell as small.
    """
    a = n ** 0.25 * R_under
    b = math.sqrt(n) / R_over
    if not a < b:
        raise ValueError(
            f"threshold order violated: n^(1/4) R_under = {a:.4g} must be < "
            f"sqrt(n)/R_over = {b:.4g}"
        )
    p_small = 1.0 - law_tail(law, a)
    if p_small <= 0:
        raise ValueError("small-entry event has zero probability")
    small = ConditionedLaw(base=law, lo=0.0, hi=a, mass=p_small)
    p_n = law_tail(law, a) - law_tail(law, b)
    p_n = max(p_n, 0.0)
    if p_n == 0.0:
        return small, None, 0.0
    large = ConditionedLaw(base=law, lo=a, hi=b, mass=p_n)
    return small, large, p_n


@dataclass(frozen=True)
class MatchedBoundedLaw:
    """<= 3 atoms inside [-D, D] matching four target moments exactly."""

    atoms: tuple[tuple[float, float], ...]
    bound: float
    target_moments: tuple[float, float, float, float]

    def moments(self) -> tuple[float, float, float, float]:
        vals = np.array([v for v, _ in self.atoms])
        probs = np.array([p for _, p in self.atoms])
        return tuple(float((vals ** s) @ probs) for s in (1, 2, 3, 4))

    def sample_cells(self, keys: np.ndarray, draw_index=0) -> np.ndarray:
        u = _rng.uniforms(keys, draw_index)
        vals = np.array([v for v, _ in self.atoms])
        cum = np.cumsum([p for _, p in self.atoms])
        return vals[np.searchsorted(cum, u, side="right").clip(0, len(vals) - 1)]


_MATCH_TOL = 1e-10


def match_bounded(target, D: float) -> MatchedBoundedLaw:
    """Construct a bounded <=3-atom law with the target's moments 1-4.

    Gauss-quadrature route: a balancing atom sits at 0 with weight
    det(H3)/det(H2) (H3 the full 3x3 moment Hankel matrix, H2 its trailing
    2x2 minor); the remaining mass is the unique two-atom law whose nodes
    are the roots of the degree-2 orthogonal polynomial of the reduced
    moment sequence, with weights from the 2x2 Vandermonde moment system.
    """
    m1, m2, m3, m4 = (float(x) for x in target)
    if D <= 0:
        raise MomentMatchError("bound D must be positive")
    H3 = np.array([[1.0, m1, m2], [m1, m2, m3], [m2, m3, m4]])
    eigs = np.linalg.eigvalsh(H3)
    if eigs.min() < -1e-10:
        raise MomentMatchError(
            f"moment sequence is not realizable (Hankel eigenvalue {eigs.min():.3e})"
        )
    det_h3 = float(np.linalg.det(H3))
    det_h2 = m2 * m4 - m3 * m3
    if det_h2 <= 1e-14:
        # degenerate: the law itself has <= 2 atoms; handle one-atom case
        if m2 <= 1e-14:
            atoms = (((m1), 1.0),)
            return _validated(atoms, D, (m1, m2, m3, m4))
        det_h3 = 0.0
        w0 = 0.0
    else:
        w0 = max(det_h3, 0.0) / det_h2
    if w0 >= 1.0:
        raise MomentMatchError("balancing-atom weight >= 1; sequence degenerate at 0")
    mu0 = 1.0 - w0
    # annihilating quadratic x^2 + b x + c of the reduced sequence
    # (mu0, m1, m2, m3): solve [ [m1, mu0], [m2, m1] ] [b, c]^T = -[m2, m3]
    den = m1 * m1 - mu0 * m2
    if abs(den) < 1e-300:
        raise MomentMatchError("degenerate reduced moment sequence")
    bq = (-m2 * m1 + m3 * mu0) / den
    cq = (-m3 * m1 + m2 * m2) / den
    disc = bq * bq - 4.0 * cq
    if disc < 0:
        raise MomentMatchError("orthogonal polynomial has complex roots")
    root = math.sqrt(disc)
    x1 = (-bq - root) / 2.0
    x2 = (-bq + root) / 2.0
    if abs(x1 - x2) < 1e-14:
        raise MomentMatchError("coincident quadrature nodes")
    # weights from the Vandermonde system on (x1, x2) against (mu0, m1)
    w2 = (m1 - mu0 * x1) / (x2 - x1)
    w1 = mu0 - w2
    atoms = [(0.0, w0), (x1, w1), (x2, w2)]
    atoms = [(v, p) for v, p in atoms if p > 1e-14]
    # merge a node that collides with the balancing atom
    merged: dict[float, float] = {}
    for v, p in atoms:
        merged[v] = merged.get(v, 0.0) + p
    atoms = tuple(sorted(merged.items()))
    return _validated(atoms, D, (m1, m2, m3, m4))


def _validated(atoms, D, target) -> MatchedBoundedLaw:
    vals = np.array([v for v, _ in atoms])
    probs = np.array([p for _, p in atoms])
    if np.any(probs < -1e-12):
        raise MomentMatchError("negative atom weight; sequence not realizable")
    if abs(probs.sum() - 1.0) > 1e-10:
        raise MomentMatchError(f"atom weights sum to {probs.sum():.12f}, not 1")
    if np.max(np.abs(vals)) > D + 1e-12:
        raise MomentMatchError(
            f"support radius {np.max(np.abs(vals)):.4g} exceeds bound D = {D:g}"
        )
    law = MatchedBoundedLaw(atoms=atoms, bound=float(D), target_moments=target)
    got = law.moments()
    err = max(abs(g - t) for g, t in zip(got, target))
    if err > _MATCH_TOL:
        raise MomentMatchError(f"moment mismatch {err:.3e} exceeds {_MATCH_TOL}")
    return law
