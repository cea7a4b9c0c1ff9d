"""Thin SVD of the training data and the closed-form spectral estimators.

The sample covariance Sigma = (1/T) X X^T is never formed.  Its spectrum is
obtained from the thin SVD of the centered data X (cost O(N T^2), space
O(N T)); both regularized estimators then act on the covariance eigenvalues
d_t = s_t^2 / T through scalar maps, so a whole regularization path costs
O(T) per grid point after the single SVD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dataset import DataMatrix
from .errors import NumericError, UsageError
from .model import EigenBounds, LowRankPrecision

__all__ = [
    "SpectralBasis",
    "RegularizationPath",
    "thin_svd",
    "riccati_fit",
    "tikhonov_fit",
    "solution_path",
    "eigen_bounds",
    "select_rho_by_validation",
    "isotropic_fit",
]

# Above this aspect ratio the SVD goes through the T x T Gram matrix X^T X,
# which keeps the workspace at O(NT) even for millions of variables.
_GRAM_RATIO = 32
_GRAM_MIN_N = 1024


@dataclass(frozen=True)
class SpectralBasis:
    """Thin SVD of centered data: X ~ U diag(s) V^T with V discarded.

    ``cov_eigvals`` are the covariance eigenvalues d_t = s_t^2 / T.
    """

    basis_u: np.ndarray
    data_singvals: np.ndarray
    cov_eigvals: np.ndarray
    n_vars: int
    n_samples: int
    mean: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.basis_u, dtype=np.float64)
        s = np.asarray(self.data_singvals, dtype=np.float64).ravel()
        d = np.asarray(self.cov_eigvals, dtype=np.float64).ravel()
        object.__setattr__(self, "basis_u", u)
        object.__setattr__(self, "data_singvals", s)
        object.__setattr__(self, "cov_eigvals", d)
        r = s.size
        if u.shape != (self.n_vars, r) or d.size != r:
            raise NumericError("inconsistent basis shapes", r=r, u_shape=u.shape)
        if r > min(self.n_vars, self.n_samples):
            raise NumericError("rank exceeds min(N, T)", r=r)
        if r > 0:
            if np.any(np.diff(s) > 0) or s[-1] <= 0:
                raise NumericError("singular values must be positive nonincreasing")
            g = u.T @ u
            dev = np.abs(g - np.eye(r)).max()
            if dev > 1e-10:
                raise NumericError("basis not orthonormal", deviation=float(dev))

    @property
    def rank(self) -> int:
        return self.data_singvals.size

    @property
    def spec_norm_cov(self) -> float:
        """||Sigma||_2 = largest covariance eigenvalue (0 for rank 0)."""
        return float(self.cov_eigvals[0]) if self.rank else 0.0


def _cholesky_orthonormalize(u: np.ndarray) -> np.ndarray:
    """Two rounds of Cholesky-based re-orthonormalization (CholeskyQR2).

    For the near-orthonormal factor produced by the Gram path this reaches
    machine-precision orthogonality using only matrix products and r x r
    triangular solves, which scale smoothly in N unlike a Householder QR of
    the tall factor.  Falls back to Householder QR if a Gram matrix is not
    numerically positive definite.
    """
    for _ in range(2):
        g = u.T @ u
        try:
            chol = np.linalg.cholesky(g)
        except np.linalg.LinAlgError:
            q, rr = np.linalg.qr(u)
            return q * np.sign(np.diag(rr))[None, :]
        u = scipy.linalg.solve_triangular(chol, u.T, lower=True,
                                          check_finite=False).T
    return u


def thin_svd(data: DataMatrix) -> SpectralBasis:
    """Thin SVD of centered data with rank truncation.

    Singular values below max(N, T) * eps * s_max are dropped; the dropped
    directions land in the isotropic c I term of any fitted model, which is
    exactly the closed-form prescription for a zero covariance eigenvalue.
    """
    if data.mean is None:
        raise UsageError("thin_svd requires centered data (mean present)")
    x = data.values
    n, t = x.shape
    if not np.any(x):
        return SpectralBasis(basis_u=np.zeros((n, 0)), data_singvals=np.zeros(0),
                             cov_eigvals=np.zeros(0), n_vars=n, n_samples=t,
                             mean=data.mean)
    if n >= max(_GRAM_RATIO * t, _GRAM_MIN_N):
        # Tall case: eigendecompose the T x T Gram matrix, then recover U and
        # re-orthonormalize it.  Never touches an N x N object.
        g = x.T @ x
        w, v = np.linalg.eigh(g)
        w = w[::-1]
        v = v[:, ::-1]
        s = np.sqrt(np.clip(w, 0.0, None))
        tol = max(n, t) * np.finfo(float).eps * (s[0] if s.size else 0.0)
        keep = s > tol
        s = s[keep]
        u = x @ (v[:, keep] / s[None, :])
        u = _cholesky_orthonormalize(u)
    else:
        u, s, _ = np.linalg.svd(x, full_matrices=False)
        tol = max(n, t) * np.finfo(float).eps * s[0]
        keep = s > tol
        u = u[:, keep]
        s = s[keep]
    return SpectralBasis(basis_u=u, data_singvals=s, cov_eigvals=s * s / t,
                         n_vars=n, n_samples=t, mean=data.mean)


def _riccati_diag(cov_eigvals: np.ndarray, rho: float):
    """Per-eigenvalue solution of the stationarity equation 1/x - d - rho x = 0.

    Uses the cancellation-free positive root x = 2 / (d + sqrt(d^2 + 4 rho)),
    algebraically identical to sqrt(1/rho + d^2/(4 rho^2)) - d/(2 rho).
    """
    c = 1.0 / np.sqrt(rho)
    lam = 2.0 / (cov_eigvals + np.sqrt(cov_eigvals * cov_eigvals + 4.0 * rho))
    return lam - c, c


def _tikhonov_diag(cov_eigvals: np.ndarray, rho: float):
    c = 1.0 / rho
    return -cov_eigvals / (rho * (cov_eigvals + rho)), c


_DIAG_MAPS = {"riccati": _riccati_diag, "tikhonov": _tikhonov_diag}


def eigen_bounds(spec_norm_cov: float, rho: float, method: str = "riccati") -> EigenBounds:
    """Bracket [alpha, beta] for all eigenvalues of the fitted model."""
    if rho <= 0:
        raise UsageError("rho must be positive", rho=rho)
    if spec_norm_cov < 0:
        raise UsageError("spectral norm must be nonnegative", value=spec_norm_cov)
    s = float(spec_norm_cov)
    if method == "riccati":
        alpha = 2.0 / (s + np.sqrt(s * s + 4.0 * rho))
        beta = 1.0 / np.sqrt(rho)
    elif method == "tikhonov":
        alpha = 1.0 / (s + rho)
        beta = 1.0 / rho
    else:
        raise UsageError("unknown method", method=method)
    return EigenBounds(alpha=float(alpha), beta=float(beta))


def _fit(basis: SpectralBasis, rho: float, method: str) -> LowRankPrecision:
    if rho <= 0:
        raise UsageError("rho must be positive", rho=rho)
    diag, c = _DIAG_MAPS[method](basis.cov_eigvals, rho)
    return LowRankPrecision(basis_a=basis.basis_u, diag_d=diag, c=c,
                            mean=basis.mean, orthonormal=True,
                            bounds=eigen_bounds(basis.spec_norm_cov, rho, method))


def riccati_fit(basis: SpectralBasis, rho: float) -> LowRankPrecision:
    """Closed-form solution of the Frobenius-penalized likelihood problem."""
    return _fit(basis, rho, "riccati")


def tikhonov_fit(basis: SpectralBasis, rho: float) -> LowRankPrecision:
    """Closed-form solution (Sigma + rho I)^{-1} in factored form."""
    return _fit(basis, rho, "tikhonov")


@dataclass(frozen=True)
class RegularizationPath:
    """Per-rho diagonals and isotropic terms over a shared spectral basis."""

    basis: SpectralBasis
    rhos: np.ndarray
    diags: np.ndarray  # (M, r)
    cs: np.ndarray  # (M,)
    method: str

    def __len__(self) -> int:
        return self.rhos.size

    def model_at(self, i: int) -> LowRankPrecision:
        """O(1) model extraction beyond sharing the basis."""
        return LowRankPrecision(
            basis_a=self.basis.basis_u, diag_d=self.diags[i], c=float(self.cs[i]),
            mean=self.basis.mean, orthonormal=True,
            bounds=eigen_bounds(self.basis.spec_norm_cov, float(self.rhos[i]),
                                self.method))


def solution_path(basis: SpectralBasis, rhos, method: str = "riccati") -> RegularizationPath:
    """Fit every rho in O(r) each after the one-time SVD."""
    if method not in _DIAG_MAPS:
        raise UsageError("unknown method", method=method)
    rhos = np.asarray(rhos, dtype=np.float64).ravel()
    if rhos.size == 0:
        raise UsageError("rho grid is empty")
    if np.any(rhos <= 0):
        raise UsageError("all rhos must be positive")
    diags = np.empty((rhos.size, basis.rank))
    cs = np.empty(rhos.size)
    for i, rho in enumerate(rhos):
        diags[i], cs[i] = _DIAG_MAPS[method](basis.cov_eigvals, float(rho))
    return RegularizationPath(basis=basis, rhos=rhos, diags=diags, cs=cs,
                              method=method)


def _avg_loglik_centered(model: LowRankPrecision, z: np.ndarray) -> float:
    """Average log-likelihood over columns already centered by the model mean."""
    w = model.basis_a.T @ z
    quad = np.einsum("rt,r,rt->t", w, model.diag_d, w) + model.c * (z * z).sum(axis=0)
    return float(model.logdet - quad.mean())


def select_rho_by_validation(path: RegularizationPath, val_data: DataMatrix):
    """Pick the rho maximizing average held-out log-likelihood.

    ``val_data`` must already be centered with the training mean.  Ties break
    toward larger rho (stronger regularization).
    """
    if val_data.n_vars != path.basis.n_vars:
        raise UsageError("validation data dimension mismatch",
                         expected=path.basis.n_vars, got=val_data.n_vars)
    z = val_data.values
    scores = np.empty(len(path))
    for i in range(len(path)):
        scores[i] = _avg_loglik_centered(path.model_at(i), z)
    best = 0
    for i in range(1, len(path)):
        if scores[i] > scores[best] or (
                scores[i] == scores[best] and path.rhos[i] > path.rhos[best]):
            best = i
    return float(path.rhos[best]), np.column_stack([path.rhos, scores])


def isotropic_fit(basis: SpectralBasis) -> LowRankPrecision:
    """Rank-zero isotropic MLE c = N / tr(Sigma); the independent baseline."""
    trace = float(basis.cov_eigvals.sum())
    if trace <= 0:
        raise NumericError("isotropic MLE undefined for zero data")
    return LowRankPrecision(basis_a=np.zeros((basis.n_vars, 0)),
                            diag_d=np.zeros(0), c=basis.n_vars / trace,
                            mean=basis.mean, orthonormal=True)
