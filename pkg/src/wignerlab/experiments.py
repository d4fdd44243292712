"""Monte Carlo harness for scaling-law experiments.

Runs seeded trial grids over (ensemble, n, z, p) cells, applying an
optional truncation or moment-replacement pipeline, and estimates the
p-th moments of the Stieltjes gap |m_esd - m_sc|, its imaginary part, and
the error statistic.  Slope regressions of log E^(1/p) against log(nv),
log n, or log(n (kappa + v)) quantify the decay rates; the spectral
statistics (Kolmogorov distance, window counts, rigidity, delocalization)
are computed per trial from eigendecompositions.

Seeds derive from (base_seed, cell index, trial index, retry), so record
sets are bit-for-bit reproducible and independent of the thread count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng, semicircle, spectral, truncation
from .ensembles import EntryLaw, SymmetricMatrixSample, sample_wigner
from .spectral import EigensolverError

__all__ = [
    "Constants",
    "ExperimentConfig",
    "ExperimentRecord",
    "StatRecord",
    "ScalingFit",
    "AuditError",
    "DegenerateFitError",
    "run_local_law",
    "fit_scaling",
    "fit_powerlaw",
    "kolmogorov_distance",
    "counting_statistic",
    "rigidity_profile",
    "delocalization_stat",
    "coordinate_mass_bound",
    "run_kolmogorov",
    "run_rigidity",
    "run_delocalization",
    "edge_imag_experiment",
]

MAX_RETRIES = 3


class AuditError(RuntimeError):
    """An exact identity failed inside a Monte Carlo trial."""


class DegenerateFitError(ValueError):
    """Regression impossible: predictor has no spread."""


@dataclass(frozen=True)
class Constants:
    """Free constants of the asymptotic statements, pinned for desk scale.

    ``log_base`` governs every parameter rule that reads "log n" (the
    resolution floor v_0 = A_0 log^alpha(n)/n and the R_under / R_over /
    r / K rules); base 10 keeps the pinned acceptance windows attainable
    at n <= 2048.
    """

    A_0: float = 8.0
    A_1: float = 1.0
    log_base: float = 10.0
    chernoff_c: float = 1.0
    D_bound: float = 4.0

    def log(self, n: int) -> float:
        return math.log(n, self.log_base)

    def v_0(self, n: int, alpha: int) -> float:
        return self.A_0 * self.log(n) ** alpha / n

    def R_under(self, n: int) -> float:
        return float(math.ceil(self.log(n)))

    def R_over(self, n: int) -> float:
        return self.log(n)

    def r_cluster(self, n: int) -> int:
        return int(math.ceil(self.log(n) ** 3))

    def K_deviant(self, n: int) -> int:
        return int(math.ceil(self.log(n) ** 3))


@dataclass(frozen=True)
class ExperimentConfig:
    ensemble: EntryLaw
    n_grid: tuple[int, ...]
    u_list: tuple[float, ...] = (0.0,)
    V: float = 2.0
    alpha: int = 2
    v_mode: str = "v0"  # "v0" (single floor point) | "grid" | "explicit"
    v_list: tuple[float, ...] = ()
    points_per_decade: int = 8
    p_list: tuple[int, ...] = (2,)
    trials: int = 100
    base_seed: int = 1
    pipeline: str = "raw"  # raw | truncated | replaced
    threads: int = 1
    constants: Constants = field(default_factory=Constants)
    audit_max_n: int = 64  # full resolvent audit on every trial up to here

    def __post_init__(self):
        if self.pipeline not in ("raw", "truncated", "replaced"):
            raise ValueError(f"unknown pipeline {self.pipeline!r}")
        if self.v_mode not in ("v0", "grid", "explicit"):
            raise ValueError(f"unknown v_mode {self.v_mode!r}")
        if self.v_mode == "explicit" and not self.v_list:
            raise ValueError("explicit v_mode requires v_list")
        if min(self.p_list) < 1:
            raise ValueError("p must be >= 1")
        for n in self.n_grid:
            cap = max(1.0, self.constants.A_1 * self.constants.log(n) ** self.alpha)
            if max(self.p_list) > cap:
                raise ValueError(
                    f"p = {max(self.p_list)} exceeds A_1 log^{self.alpha}(n) = "
                    f"{cap:.3g} at n = {n}"
                )
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def v_values(self, n: int) -> tuple[float, ...]:
        if self.v_mode == "explicit":
            return tuple(self.v_list)
        v0 = self.constants.v_0(n, self.alpha)
        if self.v_mode == "v0":
            return (v0,)
        dom = semicircle.SpectralDomain(
            u_0=max(max(abs(u) for u in self.u_list), 1e-9) + 1e-9,
            V=self.V,
            A_0=self.constants.A_0,
            alpha=self.alpha,
            n=n,
            log_base=self.constants.log_base,
        )
        return tuple(float(v) for v in dom.v_grid(self.points_per_decade))

    def cells(self) -> list[tuple[int, float, float, int]]:
        """Deterministic cell enumeration, sorted by (n, u, v, p)."""
        out = []
        for n in self.n_grid:
            for u in self.u_list:
                for v in self.v_values(n):
                    for p in self.p_list:
                        out.append((int(n), float(u), float(v), int(p)))
        return sorted(out)


@dataclass(frozen=True)
class ExperimentRecord:
    """Aggregated moments for one (law, n, z, p, pipeline) cell."""

    law: str
    n: int
    u: float
    v: float
    p: int
    pipeline: str
    trials: int
    mean_abs_gap_p: float
    se_abs_gap_p: float
    mean_abs_imgap_p: float
    se_abs_imgap_p: float
    mean_abs_err_p: float
    se_abs_err_p: float
    admissible_count: int
    degraded: bool
    wall_time_s: float = field(compare=False)

    @property
    def response(self) -> float:
        """E^(1/p) of the absolute gap moment."""
        return self.mean_abs_gap_p ** (1.0 / self.p)

    @property
    def imag_response(self) -> float:
        return self.mean_abs_imgap_p ** (1.0 / self.p)


def _pipeline_matrix(config: ExperimentConfig, sample: SymmetricMatrixSample):
    """Apply the configured pipeline; returns (W, admissible_or_None)."""
    cst = config.constants
    n = sample.n
    if config.pipeline == "raw":
        return sample.scaled, None
    if config.pipeline == "truncated":
        _, breve, _ = truncation.center_and_renormalize(sample, cst.R_over(n))
        return breve / math.sqrt(n), None
    # replaced: truncate, take the small/large configuration, redraw small
    hat, _ = truncation.truncate_hat(sample, cst.R_over(n))
    hat_sample = SymmetricMatrixSample(n=n, entries=hat, law=sample.law, seed=sample.seed)
    cfg = truncation.build_configuration(
        hat_sample, cst.R_under(n), cst.r_cluster(n), cst.K_deviant(n), R_over=cst.R_over(n)
    )
    verdict = truncation.classify(cfg)
    redraw_seed = _rng.derive_key(sample.seed, 0x52455052)
    replaced = truncation.replacement_matrix(hat_sample, cfg, cst.D_bound, redraw_seed)
    return replaced / math.sqrt(n), verdict.r_admissible


def _audit_light(W: np.ndarray, lam: np.ndarray, z: complex):
    """Eigenvalue-level identity checks, run on every trial."""
    n = len(lam)
    trace_gap = abs(lam.sum() - np.trace(W))
    if trace_gap > 1e-8 * max(1.0, n):
        raise AuditError(f"eigenvalue sum vs trace gap {trace_gap:.3e}")
    # Hilbert-Schmidt Ward identity from the spectral representation
    m = np.mean(1.0 / (lam - z))
    lhs = np.mean(1.0 / np.abs(lam - z) ** 2)
    rhs = m.imag / z.imag
    if abs(lhs - rhs) > 1e-8 * max(1.0, abs(lhs)):
        raise AuditError(f"Ward trace identity gap {abs(lhs - rhs):.3e}")


def _audit_full(W: np.ndarray, z: complex, probe_j: int, deep: bool):
    """Resolvent-level identity checks: gap identity plus every Schur row.

    With ``deep`` (small n) the bulk error terms are additionally
    cross-checked against the direct minor-resolvent path and the Ward
    row identities of the dense resolvent.
    """
    sample = spectral.local_law_sample(W, z)
    if sample.identity_residual > 1e-8:
        raise AuditError(f"gap identity residual {sample.identity_residual:.3e}")
    if sample.schur_residual_max > 1e-8:
        raise AuditError(f"Schur residual {sample.schur_residual_max:.3e}")
    nv = W.shape[0] * z.imag
    if np.max(np.abs(sample.eps_trace_terms)) > 1.0 / nv * (1.0 + 1e-8) + 1e-12:
        raise AuditError("trace-increment bound 1/(nv) violated")
    if deep:
        terms = spectral.epsilon_decomposition(W, probe_j, z)
        if abs(terms.total - sample.eps_totals[probe_j]) > 1e-8:
            raise AuditError(f"bulk vs direct error-term mismatch at j={probe_j}")
        ward = spectral.ward_check(spectral.resolvent(W, z))
        if ward.max_row_gap > 1e-8:
            raise AuditError(f"Ward row gap {ward.max_row_gap:.3e}")
    return sample


def _one_trial(config: ExperimentConfig, cell_index: int, cell, trial: int):
    """Pure function of (config, cell, trial): gap moments for one matrix."""
    n, u, v, p = cell
    z = complex(u, v)
    last_error = None
    for retry in range(MAX_RETRIES + 1):
        seed = _rng.derive_key(config.base_seed, cell_index, trial, retry)
        sample = sample_wigner(config.ensemble, n, seed)
        try:
            W, admissible = _pipeline_matrix(config, sample)
            lam = np.linalg.eigvalsh(W)
            m = complex(np.mean(1.0 / (lam - z)))
            gap = m - semicircle.stieltjes(z)
            deep = n <= config.audit_max_n
            if deep or trial == 0:
                law_sample = _audit_full(W, z, probe_j=trial % n, deep=deep)
                # cross-validate the eigenprojection and dense-solve paths
                if abs(law_sample.gap - gap) > 1e-9:
                    raise AuditError(
                        f"resolvent path disagreement {abs(law_sample.gap - gap):.3e}"
                    )
            _audit_light(W, lam, z)
        except EigensolverError as exc:
            last_error = exc
            continue
        b_n = semicircle.edge_factor(z) + gap
        err = gap * b_n  # exact identity, audited against the direct path
        return {
            "gap_p": abs(gap) ** p,
            "imgap_p": abs(gap.imag) ** p,
            "err_p": abs(err) ** p,
            "admissible": admissible,
            "degraded": False,
        }
    return {"degraded": True, "error": str(last_error)}


def run_local_law(config: ExperimentConfig) -> list[ExperimentRecord]:
    """Estimate gap moments over every config cell; reproducible by seed."""
    records = []
    cells = config.cells()
    for cell_index, cell in enumerate(cells):
        n, u, v, p = cell
        t0 = time.perf_counter()
        tasks = range(config.trials)
        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                results = list(
                    pool.map(lambda t: _one_trial(config, cell_index, cell, t), tasks)
                )
        else:
            results = [_one_trial(config, cell_index, cell, t) for t in tasks]
        ok = [r for r in results if not r["degraded"]]
        degraded = len(ok) < len(results)
        if not ok:
            raise RuntimeError(f"all trials degraded in cell {cell}")

        def _stats(key):
            vals = np.array([r[key] for r in ok])
            se = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
            return float(vals.mean()), float(se)

        mg, sg = _stats("gap_p")
        mi, si = _stats("imgap_p")
        me, se_ = _stats("err_p")
        adm = sum(1 for r in ok if r.get("admissible"))
        records.append(
            ExperimentRecord(
                law=config.ensemble.label,
                n=n,
                u=u,
                v=v,
                p=p,
                pipeline=config.pipeline,
                trials=len(ok),
                mean_abs_gap_p=mg,
                se_abs_gap_p=sg,
                mean_abs_imgap_p=mi,
                se_abs_imgap_p=si,
                mean_abs_err_p=me,
                se_abs_err_p=se_,
                admissible_count=adm,
                degraded=degraded,
                wall_time_s=time.perf_counter() - t0,
            )
        )
    return records


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares power-law fit in log-log coordinates."""

    slope: float
    intercept: float
    slope_stderr: float
    r_squared: float
    predictors: tuple[float, ...]
    responses: tuple[float, ...]
    residuals: tuple[float, ...]


def fit_powerlaw(predictors, responses) -> ScalingFit:
    """OLS of log(response) on log(predictor)."""
    x = np.log(np.asarray(predictors, dtype=float))
    y = np.log(np.asarray(responses, dtype=float))
    if len(x) < 3:
        raise DegenerateFitError("need at least 3 points")
    if np.ptp(x) < 1e-12:
        raise DegenerateFitError("predictor has no spread")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = len(x) - 2
    sxx = float(np.sum((x - x.mean()) ** 2))
    stderr = math.sqrt(ss_res / dof / sxx) if dof > 0 and sxx > 0 else 0.0
    return ScalingFit(
        slope=float(coef[0]),
        intercept=float(coef[1]),
        slope_stderr=stderr,
        r_squared=r2,
        predictors=tuple(float(v) for v in np.asarray(predictors, dtype=float)),
        responses=tuple(float(v) for v in np.asarray(responses, dtype=float)),
        residuals=tuple(float(v) for v in resid),
    )


def fit_scaling(records, mode: str, statistic: str = "gap") -> ScalingFit:
    """Fit log E^(1/p) of a recorded statistic against the mode's predictor.

    Modes: ``nv_bulk`` (predictor n v), ``n_kolmogorov`` (predictor n),
    ``edge_kappa`` (predictor n (kappa(u) + v)).
    """
    preds, resps = [], []
    for rec in records:
        if mode == "nv_bulk":
            preds.append(rec.n * rec.v)
        elif mode == "n_kolmogorov":
            preds.append(float(rec.n))
        elif mode == "edge_kappa":
            preds.append(rec.n * (semicircle.edge_distance(rec.u) + rec.v))
        else:
            raise ValueError(f"unknown fit mode {mode!r}")
        resps.append(rec.imag_response if statistic == "imgap" else rec.response)
    return fit_powerlaw(preds, resps)


def kolmogorov_distance(spec: spectral.SpectralDecomposition) -> float:
    """Exact sup |ESD - semicircle CDF|, evaluated at the jump points."""
    lam = spec.eigenvalues
    n = spec.n
    G = semicircle.cdf(lam)
    j = np.arange(1, n + 1)
    return float(np.max(np.maximum(np.abs(j / n - G), np.abs((j - 1) / n - G))))


def counting_statistic(spec: spectral.SpectralDecomposition, x: float, delta: float) -> float:
    """Signed deviation of the count in [x +/- delta/(2n)] from density * delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    half = delta / (2.0 * spec.n)
    count = int(np.count_nonzero((spec.eigenvalues >= x - half) & (spec.eigenvalues <= x + half)))
    return count - float(semicircle.density(x)) * delta


@dataclass(frozen=True)
class RigidityProfile:
    deviations: np.ndarray = field(repr=False)   # |lambda_j - gamma_j|
    normalized: np.ndarray = field(repr=False)   # scaled by n^(2/3) min(j, n+1-j)^(1/3)
    bulk_max: float
    edge_max: float
    bulk_range: tuple[int, int]  # 1-based inclusive


def rigidity_profile(
    spec: spectral.SpectralDecomposition,
    quantiles: semicircle.SemicircleQuantiles,
) -> RigidityProfile:
    """Per-index eigenvalue deviations from the classical locations."""
    if quantiles.n != spec.n:
        raise ValueError("quantile grid size mismatch")
    n = spec.n
    j = np.arange(1, n + 1)
    dev = np.abs(spec.eigenvalues - quantiles.gamma)
    rho = dev * n ** (2.0 / 3.0) * np.minimum(j, n + 1 - j) ** (1.0 / 3.0)
    logn = math.log(n)
    lo = max(1, int(math.ceil(logn)))
    hi = min(n, int(math.floor(n - logn + 1)))
    bulk = (j >= lo) & (j <= hi)
    bulk_max = float(rho[bulk].max()) if bulk.any() else 0.0
    edge_max = float(rho[~bulk].max()) if (~bulk).any() else 0.0
    return RigidityProfile(
        deviations=dev, normalized=rho, bulk_max=bulk_max, edge_max=edge_max, bulk_range=(lo, hi)
    )


@dataclass(frozen=True)
class DelocalizationStat:
    max_coordinate: float
    normalized_ratio: float  # max |u_jk| / sqrt(log(n)/n)
    degenerate_spectrum: bool


def delocalization_stat(spec: spectral.SpectralDecomposition) -> DelocalizationStat:
    """Largest eigenvector coordinate, normalized by sqrt(log(n)/n)."""
    if spec.n < 2:
        raise ValueError("delocalization statistic requires n >= 2")
    gaps = np.diff(spec.eigenvalues)
    degenerate = bool(np.any(gaps < 1e-10 * max(1.0, float(np.abs(spec.eigenvalues).max()))))
    mx = float(np.abs(spec.vectors).max())
    norm = math.sqrt(math.log(spec.n) / spec.n)
    return DelocalizationStat(max_coordinate=mx, normalized_ratio=mx / norm, degenerate_spectrum=degenerate)


def coordinate_mass_bound(
    spec: spectral.SpectralDecomposition, coord: int, u_grid, lam: float
) -> tuple[float, float]:
    """(max eigenvector mass at a coordinate, resolvent bound 2 sup lam Im R_cc)."""
    weights = spec.vectors[coord, :] ** 2
    best = 0.0
    for u in u_grid:
        z = complex(u, lam)
        r_cc = np.sum(weights / (spec.eigenvalues - z))
        best = max(best, lam * r_cc.imag)
    return float(weights.max()), 2.0 * best


@dataclass(frozen=True)
class StatRecord:
    """Per-n summary of a spectral statistic over seeded trials."""

    law: str
    n: int
    statistic: str
    trials: int
    median: float
    mean: float
    se: float


def _run_eigen_statistic(config: ExperimentConfig, name: str, per_trial) -> list[StatRecord]:
    out = []
    for cell_index, n in enumerate(sorted(config.n_grid)):
        vals = []
        for trial in range(config.trials):
            seed = _rng.derive_key(config.base_seed, 1000 + cell_index, trial, 0)
            sample = sample_wigner(config.ensemble, n, seed)
            W, _ = _pipeline_matrix(config, sample)
            vals.append(per_trial(n, W))
        vals = np.array(vals)
        se = vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
        out.append(
            StatRecord(
                law=config.ensemble.label,
                n=n,
                statistic=name,
                trials=len(vals),
                median=float(np.median(vals)),
                mean=float(vals.mean()),
                se=float(se),
            )
        )
    return out


def run_kolmogorov(config: ExperimentConfig) -> list[StatRecord]:
    def per_trial(n, W):
        lam = np.linalg.eigvalsh(W)
        spec = spectral.SpectralDecomposition(n=n, eigenvalues=lam, vectors=np.empty((0, 0)))
        return kolmogorov_distance(spec)

    return _run_eigen_statistic(config, "kolmogorov", per_trial)


def run_rigidity(config: ExperimentConfig) -> list[StatRecord]:
    grids = {n: semicircle.quantiles(n) for n in config.n_grid}

    def per_trial(n, W):
        lam = np.linalg.eigvalsh(W)
        spec = spectral.SpectralDecomposition(n=n, eigenvalues=lam, vectors=np.empty((0, 0)))
        return rigidity_profile(spec, grids[n]).bulk_max

    return _run_eigen_statistic(config, "rigidity_bulk_max", per_trial)


def run_delocalization(config: ExperimentConfig) -> list[StatRecord]:
    def per_trial(n, W):
        spec = spectral.eigendecompose(W)
        return delocalization_stat(spec).normalized_ratio

    return _run_eigen_statistic(config, "deloc_ratio", per_trial)


def edge_imag_experiment(config: ExperimentConfig):
    """Moments of |Im gap| outside the bulk plus the edge-sharpened fit."""
    for u in config.u_list:
        if abs(u) <= 2.0:
            raise ValueError(f"edge experiment requires |u| > 2, got {u}")
    records = run_local_law(config)
    fit = fit_scaling(records, mode="edge_kappa", statistic="imgap")
    return records, fit
