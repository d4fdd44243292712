"""Eigenstructure, resolvents, and exact self-consistency identities.

For W = X / sqrt(n) symmetric and z = u + iv with v > 0:

  * resolvent R(z) = (W - z I)^(-1), also for minors with index set J
    deleted; m(z) = Tr R / n is the Stieltjes transform of the ESD.
  * the Schur-complement error split of the diagonal entries,
    R_jj * (z + m - eps_j) = -1, with eps_j a sum of four exactly defined
    terms (diagonal entry, off-diagonal quadratic form, centered diagonal
    quadratic form, trace increment); a fifth variance-mismatch term is
    added for conditioned matrices whose cells have non-unit variances.
  * the gap identity gap * (b + gap) = err_sum, where
    gap = m - m_sc, b = z + 2 m_sc and err_sum = mean(eps_j R_jj).
  * the trace-increment identity Tr R - Tr R^(j) = (1 + eta_j) R_jj
    = d/dz log R_jj, with eta_j split into trace / off-diagonal /
    centered-diagonal parts.
  * Ward-type row identities sum_k |R_kl|^2 = Im R_ll / v.

Everything here is deterministic given its inputs and thread-safe.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .semicircle import SpectralPoint, edge_factor, stieltjes

__all__ = [
    "SpectralDecomposition",
    "ResolventSlice",
    "SchurErrorTerms",
    "LocalLawSample",
    "TraceIncrementIdentity",
    "WardCheck",
    "EigensolverError",
    "eigendecompose",
    "esd",
    "stieltjes_esd",
    "resolvent",
    "epsilon_decomposition",
    "local_law_sample",
    "trace_difference_identity",
    "ward_check",
]


class EigensolverError(RuntimeError):
    """Eigendecomposition did not converge; message carries a matrix hash."""


def _as_z(z) -> complex:
    if isinstance(z, SpectralPoint):
        return z.z
    z = complex(z)
    if z.imag <= 0:
        raise ValueError(f"spectral point must have Im z > 0, got {z}")
    return z


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric W.

    ``vectors[:, j]`` is the eigenvector for ``eigenvalues[j]``; its first
    nonzero coordinate is normalized to be positive so decompositions are
    deterministic functions of the input matrix.
    """

    n: int
    eigenvalues: np.ndarray = field(repr=False)
    vectors: np.ndarray = field(repr=False)


def eigendecompose(W: np.ndarray) -> SpectralDecomposition:
    """Full symmetric eigendecomposition with a deterministic sign gauge."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if W.shape != (n, n):
        raise ValueError("W must be square")
    if not np.allclose(W, W.T, atol=1e-12, rtol=0.0):
        raise ValueError("W must be symmetric")
    if not np.all(np.isfinite(W)):
        raise ValueError("W must have finite entries")
    try:
        lam, U = np.linalg.eigh(W)
    except np.linalg.LinAlgError as exc:
        digest = hashlib.sha256(np.ascontiguousarray(W).tobytes()).hexdigest()[:16]
        raise EigensolverError(f"eigh failed to converge (matrix sha256 {digest})") from exc
    # sign gauge: first coordinate above threshold made positive
    for j in range(n):
        col = U[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        pivot = nz[0] if nz.size else 0
        if col[pivot] < 0:
            U[:, j] = -col
    return SpectralDecomposition(n=n, eigenvalues=lam, vectors=U)


class _StepCdf:
    """Right-continuous empirical CDF with jumps 1/n at the eigenvalues."""

    def __init__(self, eigenvalues: np.ndarray):
        self._sorted = np.sort(np.asarray(eigenvalues, dtype=float))
        self._n = len(self._sorted)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.searchsorted(self._sorted, x, side="right") / self._n
        return out if out.ndim else float(out)


def esd(spec: SpectralDecomposition) -> _StepCdf:
    """Empirical spectral distribution as a step CDF mu((-inf, x])."""
    return _StepCdf(spec.eigenvalues)


def stieltjes_esd(spec: SpectralDecomposition, z) -> complex:
    """m(z) = mean of 1/(lambda_k - z) over the spectrum."""
    z = _as_z(z)
    return complex(np.mean(1.0 / (spec.eigenvalues - z)))


@dataclass(frozen=True)
class ResolventSlice:
    """Resolvent of W (or of a minor) at one spectral point.

    ``minor`` lists deleted indices (0-based, relative to the full
    matrix); ``n_full`` is the size of the undeleted matrix, used in the
    1/n normalization of minor traces.
    """

    z: complex
    matrix: np.ndarray = field(repr=False)
    minor: tuple[int, ...]
    n_full: int

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    @property
    def m(self) -> complex:
        """Tr R / n with n the full matrix size."""
        return self.trace / self.n_full


def _minor_indices(n: int, minor) -> np.ndarray:
    minor = tuple(sorted(set(int(j) for j in minor)))
    if minor and (minor[0] < 0 or minor[-1] >= n):
        raise ValueError(f"minor indices out of range for n = {n}")
    return np.setdiff1d(np.arange(n), np.array(minor, dtype=int))


def resolvent(W: np.ndarray, z, minor=(), method: str = "auto") -> ResolventSlice:
    """(W^(J) - z I)^(-1) with rows/columns in ``minor`` deleted.

    ``method`` 'lu' solves a complex linear system (best for a single z);
    'spectral' sums the eigenprojections (amortizes over many z for the
    same matrix); 'auto' picks 'lu'.
    """
    z = _as_z(z)
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    keep = _minor_indices(n, minor)
    Wm = W[np.ix_(keep, keep)]
    if method == "spectral":
        lam, U = np.linalg.eigh(Wm)
        R = (U / (lam - z)) @ U.T
    elif method in ("lu", "auto"):
        A = Wm.astype(complex)
        np.fill_diagonal(A, A.diagonal() - z)
        R = np.linalg.solve(A, np.eye(len(keep), dtype=complex))
    else:
        raise ValueError(f"unknown resolvent method {method!r}")
    return ResolventSlice(z=z, matrix=R, minor=tuple(int(j) for j in sorted(set(minor))), n_full=n)


@dataclass(frozen=True)
class SchurErrorTerms:
    """Error terms of the diagonal resolvent self-consistency at index j.

    ``total`` = eps1 + eps2 + eps3 + eps4 (+ eps5 when conditioned cell
    variances are supplied); satisfies r_jj * (z + m - total) = -1.
    """

    j: int
    eps1: complex  # diagonal entry W_jj
    eps2: complex  # off-diagonal quadratic form through the minor resolvent
    eps3: complex  # centered-diagonal quadratic form
    eps4: complex  # normalized trace increment (Tr R - Tr R^(j)) / n
    eps5: complex  # variance-mismatch term (conditioned matrices only)
    r_jj: complex
    m: complex
    z: complex

    @property
    def total(self) -> complex:
        return self.eps1 + self.eps2 + self.eps3 + self.eps4 + self.eps5

    @property
    def residual(self) -> float:
        return abs(self.r_jj * (self.z + self.m - self.total) + 1.0)


def epsilon_decomposition(
    W: np.ndarray,
    j: int,
    z,
    sigma_sq_row: np.ndarray | None = None,
) -> SchurErrorTerms:
    """Compute the four (or five) error terms at index j from first principles.

    Uses the minor resolvent R^(j) directly (no downdating shortcuts), so
    this is the reference path that faster bulk routines are tested
    against.  ``sigma_sq_row`` supplies per-cell variances sigma_jk^2 for
    conditioned matrices; eps3 then centers at sigma_jk^2 and eps5 carries
    the (1 - sigma_jk^2) correction.
    """
    z = _as_z(z)
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if not 0 <= j < n:
        raise ValueError(f"index {j} out of range")
    keep = _minor_indices(n, (j,))
    Rfull = resolvent(W, z)
    Rj = resolvent(W, z, minor=(j,))
    row = W[j, keep]  # X_jk / sqrt(n) for k != j
    eps1 = complex(W[j, j])
    quad_off = row @ Rj.matrix @ row - (row * row) @ np.diag(Rj.matrix)
    eps2 = -complex(quad_off)
    if sigma_sq_row is None:
        center = np.full(len(keep), 1.0 / n)
        eps5 = 0.0 + 0.0j
    else:
        sig = np.asarray(sigma_sq_row, dtype=float)
        if sig.shape != (n,):
            raise ValueError("sigma_sq_row must have one entry per column")
        center = sig[keep] / n
        eps5 = complex((1.0 / n) * np.sum((1.0 - sig[keep]) * np.diag(Rj.matrix)))
    eps3 = -complex((row * row - center) @ np.diag(Rj.matrix))
    eps4 = complex((Rfull.trace - Rj.trace) / n)
    return SchurErrorTerms(
        j=j,
        eps1=eps1,
        eps2=eps2,
        eps3=eps3,
        eps4=eps4,
        eps5=complex(eps5),
        r_jj=complex(Rfull.matrix[j, j]),
        m=Rfull.m,
        z=z,
    )


@dataclass(frozen=True)
class LocalLawSample:
    """One (W, z) evaluation of the gap identity gap * b_n = err_sum."""

    z: complex
    m_esd: complex
    m_sc: complex
    gap: complex          # m_esd - m_sc
    b: complex            # z + 2 m_sc
    b_n: complex          # b + gap
    err_sum: complex      # mean(eps_j * R_jj)
    identity_residual: float
    bound_form: float     # min(|err_sum|/|b|, sqrt(|err_sum|))
    eps_totals: np.ndarray = field(repr=False)
    eps_trace_terms: np.ndarray = field(repr=False)  # the (Tr R - Tr R^(j))/n parts
    r_diag: np.ndarray = field(repr=False)

    @property
    def schur_residual_max(self) -> float:
        """max_j |R_jj (z + m - eps_j) + 1| over every index."""
        return float(
            np.max(np.abs(self.r_diag * (self.z + self.m_esd - self.eps_totals) + 1.0))
        )


def local_law_sample(W: np.ndarray, z) -> LocalLawSample:
    """Evaluate gap, b, b_n and the error statistic with all indices.

    All n error totals are obtained in O(n^3) overall by downdating the
    full resolvent to each minor: R^(j)_kl = R_kl - R_kj R_jl / R_jj.
    """
    z = _as_z(z)
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    A = W.astype(complex)
    np.fill_diagonal(A, A.diagonal() - z)
    R = np.linalg.solve(A, np.eye(n, dtype=complex))
    diag_R = np.diag(R).copy()
    m = complex(np.trace(R)) / n

    B = W.astype(complex).copy()
    np.fill_diagonal(B, 0.0)  # row j of B is W's row j with entry j zeroed
    BR = B @ R
    s = np.diag(BR).copy()                        # row_j . R[:, j]
    q = np.einsum("ij,ij->i", BR, B)              # row_j R row_j
    Rsq_cols = R * R                               # R_kj^2 entrywise
    B2 = B * B
    diag_minor_w = B2 @ diag_R - (B2 @ Rsq_cols).diagonal() / diag_R
    # trace of each minor: Tr R^(j) = Tr R - (R^2)_jj / R_jj
    r2_jj = np.einsum("ij,ji->i", R, R)
    trace_minor = np.trace(R) - r2_jj / diag_R

    eps1 = np.diag(W).astype(complex)
    quad_full = q - (s * s) / diag_R              # row_j R^(j) row_j over k,l != j
    eps2 = -(quad_full - diag_minor_w)
    eps3 = -(diag_minor_w - (trace_minor / n))
    eps4 = (np.trace(R) - trace_minor) / n
    eps = eps1 + eps2 + eps3 + eps4

    err_sum = complex(np.mean(eps * diag_R))
    m_sc = stieltjes(z)
    gap = m - m_sc
    b = edge_factor(z)
    b_n = b + gap
    residual = abs(gap * b_n - err_sum)
    bound = min(abs(err_sum) / abs(b), math.sqrt(abs(err_sum))) if abs(b) > 0 else math.sqrt(abs(err_sum))
    return LocalLawSample(
        z=z,
        m_esd=m,
        m_sc=m_sc,
        gap=gap,
        b=b,
        b_n=b_n,
        err_sum=err_sum,
        identity_residual=residual,
        bound_form=bound,
        eps_totals=eps,
        eps_trace_terms=eps4,
        r_diag=diag_R,
    )


@dataclass(frozen=True)
class TraceIncrementIdentity:
    """Tr R - Tr R^(j) matched against its two closed forms."""

    lhs: complex            # Tr R - Tr R^(j)
    via_quadratic: complex  # (1 + eta_j) R_jj
    via_derivative: complex # R_jj^{-1} dR_jj/dz (central difference)
    eta_trace: complex      # mean diagonal of (R^(j))^2, the (m^(j))' part
    eta_offdiag: complex
    eta_diag: complex

    @property
    def eta(self) -> complex:
        return self.eta_trace + self.eta_offdiag + self.eta_diag


def trace_difference_identity(W: np.ndarray, j: int, z) -> TraceIncrementIdentity:
    """Verify Tr R - Tr R^(j) = (1 + eta_j) R_jj = R_jj^{-1} dR_jj/dz.

    eta_j is the quadratic form of W's j-th row through (R^(j))^2, split
    into its trace part, the off-diagonal sum, and the centered diagonal
    sum (the split is an exact regrouping).  The derivative form uses a
    central difference with step 1e-6 * v.
    """
    z = _as_z(z)
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    keep = _minor_indices(n, (j,))
    Rfull = resolvent(W, z)
    Rj = resolvent(W, z, minor=(j,))
    lhs = Rfull.trace - Rj.trace

    row = W[j, keep]
    Rj2 = Rj.matrix @ Rj.matrix
    eta_trace = complex(np.trace(Rj2)) / n
    full_quad = complex(row @ Rj2 @ row)
    diag_quad = complex((row * row) @ np.diag(Rj2))
    eta_offdiag = full_quad - diag_quad
    eta_diag = diag_quad - complex((1.0 / n) * np.trace(Rj2))
    # regrouped so eta_trace + eta_offdiag + eta_diag = full_quad exactly
    r_jj = complex(Rfull.matrix[j, j])
    via_quadratic = (1.0 + eta_trace + eta_offdiag + eta_diag) * r_jj

    h = 1e-6 * z.imag
    r_plus = resolvent(W, z + h).matrix[j, j]
    r_minus = resolvent(W, z - h).matrix[j, j]
    d_rjj = (r_plus - r_minus) / (2.0 * h)
    via_derivative = d_rjj / r_jj
    return TraceIncrementIdentity(
        lhs=complex(lhs),
        via_quadratic=complex(via_quadratic),
        via_derivative=complex(via_derivative),
        eta_trace=eta_trace,
        eta_offdiag=eta_offdiag,
        eta_diag=eta_diag,
    )


@dataclass(frozen=True)
class WardCheck:
    """Hilbert-Schmidt and per-row Ward sums against their Im bounds."""

    global_lhs: float   # (1/n) sum_kl |R_kl|^2
    global_rhs: float   # Im m / v
    row_lhs: np.ndarray = field(repr=False)  # sum_k |R_kl|^2 per column l
    row_rhs: np.ndarray = field(repr=False)  # Im R_ll / v

    @property
    def max_row_gap(self) -> float:
        return float(np.max(np.abs(self.row_lhs - self.row_rhs)))


def ward_check(R: ResolventSlice) -> WardCheck:
    """Evaluate sum_k |R_kl|^2 vs Im R_ll / v rowwise and in aggregate."""
    v = R.z.imag
    abs_sq = np.abs(R.matrix) ** 2
    row_lhs = abs_sq.sum(axis=0)
    row_rhs = np.diag(R.matrix).imag / v
    global_lhs = float(abs_sq.sum() / R.n_full)
    global_rhs = float(R.m.imag / v)
    return WardCheck(global_lhs=global_lhs, global_rhs=global_rhs, row_lhs=row_lhs, row_rhs=row_rhs)
