"""Entry truncation, centering/renormalization, and configuration analysis.

The truncation pipeline maps a raw symmetric sample X to

    X_hat   = X on cells with |X| <= sqrt(n)/R_over, 0 elsewhere,
    X_tilde = X_hat - E X_hat     (entrywise centering),
    X_breve = X_tilde / sigma     (sigma^2 = Var of a truncated entry),

so X_breve entries are bounded with exact mean 0 and variance 1.

The configuration matrix L marks cells with |X| <= n^(1/4) R_under as
small (L = 1); its zero-edge graph drives the deviant/typical split, the
connected-cluster size r(L), and the admissibility verdict, and selects
which cells are resampled from the conditioned or moment-matched laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .ensembles import (
    ConditionedLaw,
    EntryLaw,
    MatchedBoundedLaw,
    SymmetricMatrixSample,
    conditional_laws,
    law_tail,
    law_truncated_moment,
    match_bounded,
)

__all__ = [
    "TruncationReport",
    "ConfigurationMatrix",
    "AdmissibilityVerdict",
    "DegenerateTruncationError",
    "truncate_hat",
    "center_and_renormalize",
    "build_configuration",
    "classify",
    "sample_conditioned",
    "replacement_matrix",
    "inadmissibility_probability_bounds",
]

_SIGMA_FLOOR = 1e-6


class DegenerateTruncationError(RuntimeError):
    """Raised when truncation removes essentially all entry variance."""


@dataclass(frozen=True)
class TruncationReport:
    n: int
    R_over: float
    threshold: float
    altered_count: int  # independent cells (upper triangle incl. diagonal)
    sigma_sq: float
    mean_shift: float


def truncate_hat(sample: SymmetricMatrixSample, R_over: float):
    """Zero entries above sqrt(n)/R_over; count altered independent cells."""
    if R_over < 1:
        raise ValueError("R_over must be >= 1")
    n = sample.n
    threshold = math.sqrt(n) / R_over
    keep = np.abs(sample.entries) <= threshold
    hat = np.where(keep, sample.entries, 0.0)
    altered = int(np.count_nonzero(~keep[np.triu_indices(n)]))
    report = _report(sample.law, n, R_over, threshold, altered)
    return hat, report


def _report(law: EntryLaw, n, R_over, threshold, altered) -> TruncationReport:
    mean_shift = law_truncated_moment(law, 1, threshold)
    second = law_truncated_moment(law, 2, threshold)
    sigma_sq = second - mean_shift ** 2
    return TruncationReport(
        n=n,
        R_over=float(R_over),
        threshold=float(threshold),
        altered_count=altered,
        sigma_sq=float(sigma_sq),
        mean_shift=float(mean_shift),
    )


def center_and_renormalize(sample: SymmetricMatrixSample, R_over: float):
    """Return (X_tilde, X_breve, report): centered and unit-variance matrices.

    Expectations come from the sample's entry law (closed form or
    quadrature), so X_breve entries have exact mean 0 and variance 1 under
    the law, with support inside [-2 sqrt(n)/R_over, 2 sqrt(n)/R_over].
    """
    hat, report = truncate_hat(sample, R_over)
    if report.sigma_sq < _SIGMA_FLOOR:
        raise DegenerateTruncationError(
            f"truncated entry variance {report.sigma_sq:.3e} below {_SIGMA_FLOOR}"
        )
    tilde = hat - report.mean_shift
    breve = tilde / math.sqrt(report.sigma_sq)
    return tilde, breve, report


@dataclass(frozen=True)
class ConfigurationMatrix:
    """Symmetric 0/1 pattern of small entries with its build parameters."""

    n: int
    L: np.ndarray = field(repr=False)
    R_under: float
    r: int
    K: int
    p_n: float = 0.0

    def __post_init__(self):
        L = self.L
        if L.shape != (self.n, self.n) or not np.array_equal(L, L.T):
            raise ValueError("configuration matrix must be symmetric n x n")
        if not np.isin(L, (0, 1)).all():
            raise ValueError("configuration entries must be 0 or 1")


@dataclass(frozen=True)
class AdmissibilityVerdict:
    deviant_set: tuple[int, ...]
    typical_set: tuple[int, ...]
    components: tuple[tuple[int, ...], ...]
    r_of_L: int
    deviant_threshold: float
    deviant_inadmissible: bool
    r_admissible: bool


def build_configuration(
    sample: SymmetricMatrixSample,
    R_under: float,
    r: int,
    K: int,
    R_over: float | None = None,
) -> ConfigurationMatrix:
    """Threshold |X| at n^(1/4) R_under into a 0/1 configuration.

    The stored p_n is the analytic probability that a cell is large under
    the sample's entry law: the annulus mass P(a < |X| <= sqrt(n)/R_over)
    when R_over is given (zero when the annulus is empty, the all-small
    regime), else the raw exceedance P(|X| > a).
    """
    n = sample.n
    a = n ** 0.25 * R_under
    L = (np.abs(sample.entries) <= a).astype(np.uint8)
    if R_over is None:
        p_n = law_tail(sample.law, a)
    else:
        b = math.sqrt(n) / R_over
        p_n = max(0.0, law_tail(sample.law, a) - law_tail(sample.law, b)) if a < b else 0.0
    return ConfigurationMatrix(n=n, L=L, R_under=float(R_under), r=int(r), K=int(K), p_n=p_n)


def classify(config: ConfigurationMatrix, p_n: float | None = None) -> AdmissibilityVerdict:
    """Deviant/typical split, zero-edge components, r(L), admissibility.

    An index is deviant when its row contains any zero (diagonal
    included).  Components are connected components of the graph whose
    edges are the zero cells; r(L) is the largest component size, 0 for
    the all-ones configuration.  The verdict uses the analytic annulus
    mass p_n (argument, else the value stored on the configuration).
    """
    n = config.n
    L = config.L
    if p_n is None:
        p_n = config.p_n
    zero_rows, zero_cols = np.nonzero(np.triu(L == 0))
    deviant_mask = np.zeros(n, dtype=bool)
    deviant_mask[zero_rows] = True
    deviant_mask[zero_cols] = True

    parent = np.arange(n)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in zip(zero_rows, zero_cols):
        ra, rb = find(int(a)), find(int(b))
        if ra != rb:
            parent[rb] = ra

    comps: dict[int, list[int]] = {}
    for idx in np.flatnonzero(deviant_mask):
        comps.setdefault(find(int(idx)), []).append(int(idx))
    components = tuple(tuple(sorted(c)) for c in sorted(comps.values()))
    r_of_L = max((len(c) for c in components), default=0)

    deviant = tuple(int(i) for i in np.flatnonzero(deviant_mask))
    typical = tuple(int(i) for i in np.flatnonzero(~deviant_mask))
    threshold = config.K * max(1.0, n * n * p_n)
    deviant_inadmissible = len(deviant) >= threshold
    r_admissible = (not deviant_inadmissible) and (r_of_L <= config.r - 1)
    return AdmissibilityVerdict(
        deviant_set=deviant,
        typical_set=typical,
        components=components,
        r_of_L=r_of_L,
        deviant_threshold=float(threshold),
        deviant_inadmissible=deviant_inadmissible,
        r_admissible=r_admissible,
    )


def sample_conditioned(
    law: EntryLaw,
    config: ConfigurationMatrix,
    n: int,
    R_under: float,
    R_over: float,
    seed: int,
) -> SymmetricMatrixSample:
    """Draw H with small-conditioned entries where L = 1, large where L = 0."""
    if n != config.n:
        raise ValueError("n mismatch with configuration")
    small, large, p_n = conditional_laws(law, n, R_under, R_over)
    rows, cols = np.triu_indices(n)
    keys = _rng.cell_keys(seed, rows, cols)
    cell_small = config.L[rows, cols] == 1
    vals = np.empty(rows.shape, dtype=float)
    vals[cell_small] = small.sample_cells(keys[cell_small])
    if np.any(~cell_small):
        if large is None:
            raise ValueError(
                "configuration has large cells but the annulus mass is zero"
            )
        vals[~cell_small] = large.sample_cells(keys[~cell_small])
    X = np.zeros((n, n))
    X[rows, cols] = vals
    X[cols, rows] = vals
    return SymmetricMatrixSample(n=n, entries=X, law=law, seed=int(seed))


def replacement_matrix(
    H: SymmetricMatrixSample,
    config: ConfigurationMatrix,
    D: float,
    seed: int,
) -> np.ndarray:
    """Redraw small cells (L = 1) from the 4-moment-matched bounded law.

    Large cells (L = 0) keep H's entries.  The matched law targets the
    first four moments of the small-conditioned entry law.
    """
    n = H.n
    matched = matched_law_for(H.law, n, config.R_under, D)
    rows, cols = np.triu_indices(n)
    keys = _rng.cell_keys(seed, rows, cols)
    mask = config.L[rows, cols] == 1
    vals = H.entries[rows, cols].copy()
    vals[mask] = matched.sample_cells(keys[mask])
    out = np.zeros((n, n))
    out[rows, cols] = vals
    out[cols, rows] = vals
    return out


def matched_law_for(
    law: EntryLaw, n: int, R_under: float, D: float
) -> MatchedBoundedLaw:
    """Bounded law matching the small-conditioned moments of ``law``."""
    a = n ** 0.25 * R_under
    small = ConditionedLaw(base=law, lo=0.0, hi=a, mass=1.0 - law_tail(law, a))
    return match_bounded(small.moments(), D)


def inadmissibility_probability_bounds(
    n: int,
    r: int,
    R_under: float,
    K: float,
    p_n: float,
    chernoff_c: float = 1.0,
) -> tuple[float, float]:
    """Closed-form upper bounds for the two inadmissibility events.

    Cluster bound: exp(3r) * n / r * R_under^(-4(r-1)), evaluated in log
    space (underflows to 0, overflows to inf).  Deviant-count bound:
    exp(-c K max(1, n^2 p_n)).
    """
    if n < 1 or r < 1 or R_under <= 0 or K <= 0:
        raise ValueError("parameters must be positive")
    log_rconn = 3.0 * r + math.log(n) - math.log(r) - 4.0 * (r - 1) * math.log(R_under)
    if log_rconn > 700.0:
        p_rconn = math.inf
    elif log_rconn < -745.0:
        p_rconn = 0.0
    else:
        p_rconn = math.exp(log_rconn)
    p_deviant = math.exp(max(-745.0, -chernoff_c * K * max(1.0, n * n * p_n)))
    return p_rconn, p_deviant
