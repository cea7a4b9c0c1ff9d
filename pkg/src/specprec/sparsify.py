"""Thresholding of the orthonormal factor with spectral-norm guarantees.

Shrinking the basis entries by lambda / sqrt(N r) moves the precision matrix
by at most (2 lambda + lambda^2)(beta - alpha) in spectral norm.  Eigenvalues
never exceed beta, but the lower end of the spectrum is only preserved when
the thresholded basis keeps spectral norm <= 1; hard thresholding (and in
principle soft) can inflate it, so the exact smallest eigenvalue is recomputed
from the r x r Gram matrix and the returned model is certified from it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
import scipy.sparse as sp

from .errors import NumericError, UsageError
from .model import EigenBounds, LowRankPrecision, materialize_dense

__all__ = [
    "SparsifyReport",
    "soft_threshold_basis",
    "hard_threshold_basis",
    "sparsify_model",
    "kl_degradation_bound",
    "expected_offdiag_density",
    "measure_density",
    "save_report",
]

REPORT_DENSE_GUARD = 200


@dataclass(frozen=True)
class SparsifyReport:
    """Densities and spectral-gap accounting for one sparsification run.

    ``measured_spectral_gap`` and ``offdiag_density`` are populated only when
    N is small enough to materialize the dense matrices.
    """

    lam: float
    mode: str
    basis_density: float
    spectral_gap_bound: float
    offdiag_density: float | None = None
    measured_spectral_gap: float | None = None
    kl_bound: float | None = None

    def __post_init__(self):
        if (self.measured_spectral_gap is not None
                and self.measured_spectral_gap > self.spectral_gap_bound + 1e-9):
            raise NumericError("measured spectral gap exceeds its bound",
                               measured=self.measured_spectral_gap,
                               bound=self.spectral_gap_bound)


def _threshold(u, lam: float, mode: str) -> sp.csr_matrix:
    if lam < 0:
        raise UsageError("lambda must be nonnegative", lam=lam)
    u = np.asarray(u, dtype=np.float64)
    n, r = u.shape
    if r == 0:
        return sp.csr_matrix((n, 0))
    thr = lam / np.sqrt(n * r)
    if mode == "soft":
        w = np.sign(u) * np.maximum(0.0, np.abs(u) - thr)
    elif mode == "hard":
        w = np.where(np.abs(u) >= thr, u, 0.0)
    else:
        raise UsageError("mode must be 'soft' or 'hard'", mode=mode)
    return sp.coo_matrix(w).tocsr()


def soft_threshold_basis(u, lam: float) -> sp.csr_matrix:
    """Entrywise shrinkage sign(u) max(0, |u| - lambda / sqrt(N r))."""
    return _threshold(u, lam, "soft")


def hard_threshold_basis(u, lam: float) -> sp.csr_matrix:
    """Keep entries with |u| >= lambda / sqrt(N r) (inclusive), zero the rest."""
    return _threshold(u, lam, "hard")


def sparsify_model(model: LowRankPrecision, lam: float, mode: str = "soft",
                   dense_guard: int = REPORT_DENSE_GUARD):
    """Threshold an orthonormal model's basis; eigenvalues stay in [alpha, beta].

    Requires the model in the form U diag(d) U^T + beta I with bounds present
    and -(beta - alpha) < d_t <= 0, which is what the Riccati estimator
    produces (its isotropic term 1/sqrt(rho) is exactly the upper bound).
    """
    if not model.orthonormal:
        raise UsageError("sparsify requires an orthonormal model")
    if model.bounds is None:
        raise UsageError("sparsify requires eigenvalue bounds on the model")
    alpha, beta = model.bounds.alpha, model.bounds.beta
    if abs(model.c - beta) > 1e-9 * max(1.0, beta):
        raise UsageError("model isotropic term must equal the upper bound beta",
                         c=model.c, beta=beta)
    d = model.diag_d
    if d.size and (d.max() > 0.0 or d.min() <= -(beta - alpha) - 1e-12):
        raise NumericError("diagonal out of the admissible range (-(beta-alpha), 0]",
                           d_min=float(d.min()) if d.size else None,
                           d_max=float(d.max()) if d.size else None)
    u = model.basis_a
    if sp.issparse(u):
        u = u.toarray()
    sparse_u = _threshold(u, lam, mode)
    n, r = u.shape
    # exact smallest eigenvalue: the low-rank part is -B B^T with
    # B = U_sparse sqrt(-d), whose nonzero spectrum is that of the r x r
    # Gram matrix B^T B; costs O(n r^2), never materializes n x n
    if r:
        b = sparse_u.multiply(np.sqrt(-d)[None, :]).tocsc()
        gram = (b.T @ b).toarray()
        lam_max = float(np.linalg.eigvalsh(gram).max())
        smallest = beta - lam_max
    else:
        smallest = beta
    certified = smallest > 0.0
    new_bounds = EigenBounds(alpha=smallest, beta=beta) if certified else None
    sparse_model = LowRankPrecision(
        basis_a=sparse_u, diag_d=d.copy(), c=beta, mean=model.mean,
        orthonormal=False, bounds=new_bounds, pd_certified=certified)
    basis_density = sparse_u.nnz / (n * r) if r else 0.0
    bound = (2.0 * lam + lam * lam) * (beta - alpha)
    offdiag = gap = None
    if n <= dense_guard:
        dense_new = materialize_dense(sparse_model)
        dense_old = materialize_dense(model)
        offdiag, _ = measure_density(dense_new)
        gap = float(np.abs(np.linalg.eigvalsh(dense_new - dense_old)).max())
    report = SparsifyReport(lam=float(lam), mode=mode,
                            basis_density=float(basis_density),
                            spectral_gap_bound=float(bound),
                            offdiag_density=offdiag,
                            measured_spectral_gap=gap)
    return sparse_model, report


def kl_degradation_bound(alpha: float, second_moment_spec_norm: float,
                         spectral_gap: float) -> float:
    """(1/alpha + ||E[(x-mu)(x-mu)^T]||_2) * ||Omega_sparse - Omega||_2."""
    if alpha <= 0:
        raise UsageError("alpha must be positive", alpha=alpha)
    if second_moment_spec_norm < 0 or spectral_gap < 0:
        raise UsageError("norms must be nonnegative")
    return (1.0 / alpha + second_moment_spec_norm) * spectral_gap


def expected_offdiag_density(p: float, t: int) -> float:
    """Expected off-diagonal density 1 - (1 - p^2)^t of A diag(d) A^T + c I
    when A has i.i.d. entries that are nonzero with probability p."""
    if not (0.0 <= p <= 1.0):
        raise UsageError("p must be a probability", p=p)
    if t < 1:
        raise UsageError("t must be at least 1", t=t)
    return 1.0 - (1.0 - p * p) ** t


def measure_density(mat):
    """Exact nonzero fractions: (offdiag_density, overall_density).

    For a square matrix the first entry counts nonzero off-diagonal cells;
    for a rectangular factor it is None.  Only exact zeros count as zero.
    """
    if sp.issparse(mat):
        dense_nnz = mat.nnz
        n, m = mat.shape
        if n == m:
            offdiag_nnz = dense_nnz - np.count_nonzero(mat.diagonal())
            offdiag = offdiag_nnz / (n * (n - 1)) if n > 1 else 0.0
        else:
            offdiag = None
        total = dense_nnz / (n * m) if n * m else 0.0
        return offdiag, total
    mat = np.asarray(mat)
    n, m = mat.shape
    nnz = np.count_nonzero(mat)
    if n == m:
        offdiag_nnz = nnz - np.count_nonzero(np.diagonal(mat))
        offdiag = offdiag_nnz / (n * (n - 1)) if n > 1 else 0.0
    else:
        offdiag = None
    total = nnz / (n * m) if n * m else 0.0
    return offdiag, total


def save_report(report: SparsifyReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(report), fh)
        fh.write("\n")
