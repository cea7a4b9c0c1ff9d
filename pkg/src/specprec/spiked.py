"""Spiked-covariance ground truth, sampling, and factored KL evaluation.

The generative model draws x = U sqrt(D) y + sqrt(beta/N) xi with isotropic
sub-Gaussian y and xi, so the population covariance is U D U^T + (beta/N) I:
a K-rank spike over a scaled identity.  Everything here stays in factored
form; no N x N matrix is built on the main path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dataset import DataMatrix
from .errors import NumericError, UsageError
from .model import EigenBounds, LowRankPrecision

__all__ = [
    "SpikedModel",
    "FactoredCovariance",
    "random_spiked",
    "sample",
    "true_covariance",
    "true_precision",
    "true_precision_frob",
    "concentration_gamma",
    "recommend_rho",
    "kl_excess_bound",
    "gaussian_kl",
]


@dataclass(frozen=True)
class SpikedModel:
    """Ground-truth parameters (U, D, beta) of the spiked generator."""

    basis_u: np.ndarray  # N x K, orthonormal
    diag_d: np.ndarray  # K positive values
    beta: float
    seed: int

    def __post_init__(self):
        u = np.asarray(self.basis_u, dtype=np.float64)
        d = np.asarray(self.diag_d, dtype=np.float64).ravel()
        object.__setattr__(self, "basis_u", u)
        object.__setattr__(self, "diag_d", d)
        n, k = u.shape
        if k > n:
            raise UsageError("need K <= N", n=n, k=k)
        if d.shape != (k,) or (d.size and d.min() <= 0):
            raise NumericError("diag_d must be K positive values")
        if self.beta <= 0:
            raise NumericError("beta must be positive", beta=self.beta)
        if k > 0 and np.abs(u.T @ u - np.eye(k)).max() > 1e-10:
            raise NumericError("spike basis not orthonormal")

    @property
    def n_vars(self) -> int:
        return self.basis_u.shape[0]

    @property
    def n_components(self) -> int:
        return self.basis_u.shape[1]


def random_spiked(n: int, k: int, beta: float, density: float, seed: int) -> SpikedModel:
    """Random ground truth with disjoint per-column supports.

    Each column occupies ceil(density * n) rows no other column uses, so the
    basis is sparse and exactly orthonormal at the same time; spike strengths
    are i.i.d. uniform on [0.5, 1.5].
    """
    if k < 1 or k > n:
        raise UsageError("need 1 <= k <= n", n=n, k=k)
    if not (0.0 < density <= 1.0):
        raise UsageError("density must be in (0, 1]", density=density)
    support = int(np.ceil(density * n))
    if k * support > n:
        raise UsageError("column supports cannot be disjoint",
                         k=k, support=support, n=n)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    u = np.zeros((n, k))
    for j in range(k):
        rows = perm[j * support:(j + 1) * support]
        col = rng.standard_normal(support)
        u[rows, j] = col / np.linalg.norm(col)
    d = rng.uniform(0.5, 1.5, size=k)
    return SpikedModel(basis_u=u, diag_d=d, beta=float(beta), seed=seed)


def sample(model: SpikedModel, t: int, entry_dist: str = "gaussian",
           seed: int = 0) -> DataMatrix:
    """Draw t samples, O(N (K + 1)) each; not centered."""
    if t < 1:
        raise UsageError("need at least one sample", t=t)
    rng = np.random.default_rng(seed)
    n, k = model.basis_u.shape
    if entry_dist == "gaussian":
        y = rng.standard_normal((k, t))
        xi = rng.standard_normal((n, t))
    elif entry_dist == "rademacher":
        y = rng.integers(0, 2, size=(k, t)).astype(np.float64) * 2.0 - 1.0
        xi = rng.integers(0, 2, size=(n, t)).astype(np.float64) * 2.0 - 1.0
    else:
        raise UsageError("entry_dist must be 'gaussian' or 'rademacher'",
                         entry_dist=entry_dist)
    x = model.basis_u @ (np.sqrt(model.diag_d)[:, None] * y)
    x += np.sqrt(model.beta / n) * xi
    return DataMatrix(values=x)


@dataclass(frozen=True)
class FactoredCovariance:
    """Covariance U diag(d) U^T + iso * I with orthonormal U; never dense."""

    basis_u: np.ndarray
    diag_d: np.ndarray
    iso: float

    @property
    def n_vars(self) -> int:
        return self.basis_u.shape[0]

    @property
    def rank(self) -> int:
        return self.basis_u.shape[1]

    def trace(self) -> float:
        return float(self.diag_d.sum() + self.iso * self.n_vars)

    def spec_norm(self) -> float:
        top = float(self.diag_d.max()) if self.rank else 0.0
        return top + self.iso

    def logdet(self) -> float:
        if self.iso <= 0 or (self.rank and (self.diag_d + self.iso).min() <= 0):
            raise NumericError("covariance not positive definite")
        return float(np.log(self.diag_d + self.iso).sum()
                     + (self.n_vars - self.rank) * np.log(self.iso))

    def materialize(self, guard: int = 2000) -> np.ndarray:
        if self.n_vars > guard:
            raise UsageError("refusing to materialize a large covariance",
                             n=self.n_vars, guard=guard)
        return ((self.basis_u * self.diag_d[None, :]) @ self.basis_u.T
                + self.iso * np.eye(self.n_vars))


def true_covariance(model: SpikedModel) -> FactoredCovariance:
    """E[x x^T] = U D U^T + (beta / N) I in factored form."""
    return FactoredCovariance(basis_u=model.basis_u, diag_d=model.diag_d,
                              iso=model.beta / model.n_vars)


def true_precision(model: SpikedModel) -> LowRankPrecision:
    """Exact inverse of the spiked covariance, still factored.

    The covariance has the ridge form U D U^T + rho I with rho = beta / N, so
    its inverse is U diag(-d / (rho (d + rho))) U^T + (1 / rho) I.
    """
    n = model.n_vars
    rho = model.beta / n
    d = model.diag_d
    diag = -d / (rho * (d + rho))
    bounds = EigenBounds(alpha=1.0 / ((d.max() if d.size else 0.0) + rho),
                         beta=1.0 / rho)
    return LowRankPrecision(basis_a=model.basis_u, diag_d=diag, c=1.0 / rho,
                            mean=np.zeros(n), orthonormal=True, bounds=bounds)


def true_precision_frob(model: SpikedModel) -> float:
    """||Omega*||_F from the K + 1 distinct eigenvalues, O(K) work."""
    n, k = model.basis_u.shape
    rho = model.beta / n
    eig = 1.0 / (model.diag_d + rho)
    return float(np.sqrt(np.sum(eig ** 2) + (n - k) / rho ** 2))


def concentration_gamma(k: int, d_frob: float, beta: float, n: int, t: int,
                        delta: float) -> float:
    """High-probability Frobenius radius of the sample covariance error.

    gamma = 40 (K sqrt(||D||_F) + sqrt(beta))^2
            * sqrt((4 ln(N + K) + 2 ln(4 / delta)) / T).
    """
    if t < 1:
        raise UsageError("need t >= 1", t=t)
    if not (0.0 < delta < 1.0):
        raise UsageError("delta must be in (0, 1)", delta=delta)
    if d_frob < 0 or beta < 0:
        raise UsageError("norms must be nonnegative")
    scale = 40.0 * (k * np.sqrt(d_frob) + np.sqrt(beta)) ** 2
    return float(scale * np.sqrt((4.0 * np.log(n + k) + 2.0 * np.log(4.0 / delta)) / t))


def recommend_rho(gamma: float) -> float:
    """Regularization strength rho = 2 gamma used by the sample-complexity bound."""
    if gamma <= 0:
        raise UsageError("gamma must be positive", gamma=gamma)
    return 2.0 * gamma


def kl_excess_bound(gamma: float, omega_frob: float) -> float:
    """gamma * (1/4 + ||Omega*||_F + ||Omega*||_F^2)."""
    if gamma <= 0:
        raise UsageError("gamma must be positive", gamma=gamma)
    if omega_frob < 0:
        raise UsageError("norm must be nonnegative")
    return gamma * (0.25 + omega_frob + omega_frob * omega_frob)


def gaussian_kl(p_cov: FactoredCovariance, q_model: LowRankPrecision,
                p_mean: np.ndarray | None = None) -> float:
    """KL(P || Q) = (tr(Omega_Q Sigma_P) - N - logdet Sigma_P - logdet Omega_Q
    + (mu_P - mu_Q)^T Omega_Q (mu_P - mu_Q)) / 2, all in factored arithmetic.

    Cost O(N (K + r)^2): only cross products between the two low-rank bases
    are formed.
    """
    n = p_cov.n_vars
    if q_model.n_vars != n:
        raise UsageError("dimension mismatch", p=n, q=q_model.n_vars)
    q_model._require_pd("gaussian_kl")
    a = q_model.basis_a
    dq = q_model.diag_d
    c = q_model.c
    up, dp, iso = p_cov.basis_u, p_cov.diag_d, p_cov.iso
    cross = np.asarray(a.T @ up)  # r x K
    gram_diag = np.asarray((a.multiply(a) if sp.issparse(a) else a * a).sum(axis=0)).ravel()
    tr = float(np.einsum("rk,r,k->", cross * cross, dq, dp)
               + iso * (dq * gram_diag).sum()
               + c * dp.sum() + c * iso * n)
    logdet_p = p_cov.logdet()
    logdet_q = q_model.logdet
    mean_term = 0.0
    p_mu = np.zeros(n) if p_mean is None else np.asarray(p_mean, dtype=np.float64)
    diff = p_mu - q_model.mean
    if np.any(diff):
        w = np.asarray(a.T @ diff).ravel()
        mean_term = float(w @ (dq * w) + c * (diff @ diff))
    kl = 0.5 * (tr - n - logdet_p - logdet_q + mean_term)
    if kl < -1e-8 * max(1.0, abs(tr)):
        raise NumericError("negative KL divergence; inputs are inconsistent",
                           kl=float(kl))
    return max(kl, 0.0)
