"""Factored precision matrices Omega = A diag(d) A^T + c I.

Every estimator in the package produces this representation, and every
model-usage operation (likelihood, conditionals, partial correlations,
screening) runs on it in O(N r) or O(N r^2) without materializing an
N x N matrix.  The basis may be a dense ndarray or a scipy sparse matrix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DataError, NumericError, UsageError

__all__ = [
    "EigenBounds",
    "LowRankPrecision",
    "orthonormalize",
    "log_likelihood",
    "average_log_likelihood",
    "conditional",
    "partial_correlation",
    "screen_unimportant",
    "important_edges",
    "materialize_dense",
    "save_model",
    "save_model_with_rho",
    "load_model",
    "load_model_with_rho",
]

DENSE_GUARD = 2000


@dataclass(frozen=True)
class EigenBounds:
    """Bracket [alpha, beta] containing every eigenvalue of a fitted model."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= self.beta):
            raise NumericError("eigenvalue bounds require 0 < alpha <= beta",
                               alpha=self.alpha, beta=self.beta)


def _is_sparse(a) -> bool:
    return sp.issparse(a)


def _gram(a) -> np.ndarray:
    """A^T A as a dense r x r array."""
    g = a.T @ a
    if _is_sparse(g):
        g = g.toarray()
    return np.asarray(g)


def _row(a, n: int) -> np.ndarray:
    if _is_sparse(a):
        return np.asarray(a[n].todense()).ravel()
    return np.asarray(a[n])


def _squared(a):
    return a.multiply(a) if _is_sparse(a) else a * a


@dataclass(frozen=True)
class LowRankPrecision:
    """Precision matrix A diag(d) A^T + c I with mean vector.

    ``orthonormal`` asserts A^T A = I (checked at construction), in which
    case positive definiteness reduces to c > 0 and d_t + c > 0 and is
    certified automatically.  Non-orthonormal models are only certified when
    built by an operation that proves definiteness.
    """

    basis_a: object  # ndarray or scipy sparse, N x r
    diag_d: np.ndarray
    c: float
    mean: np.ndarray
    orthonormal: bool = False
    bounds: EigenBounds | None = None
    pd_certified: bool = False

    def __post_init__(self):
        a = self.basis_a
        if not _is_sparse(a):
            a = np.asarray(a, dtype=np.float64)
            if a.ndim != 2:
                raise DataError("basis must be a 2-d matrix")
            object.__setattr__(self, "basis_a", a)
        d = np.asarray(self.diag_d, dtype=np.float64).ravel()
        object.__setattr__(self, "diag_d", d)
        object.__setattr__(self, "c", float(self.c))
        mean = np.asarray(self.mean, dtype=np.float64).ravel()
        object.__setattr__(self, "mean", mean)
        n, r = self.basis_a.shape
        # r may exceed n: conditioning keeps the parent model's full-width
        # diagonal against a row-subset basis
        if n < 1:
            raise DataError("need at least one variable", n=n)
        if d.shape != (r,):
            raise DataError("diag length must match basis width", r=r, got=d.shape)
        if mean.shape != (n,):
            raise DataError("mean length must match N", n=n, got=mean.shape)
        if self.orthonormal:
            if r > 0:
                g = _gram(self.basis_a)
                if np.abs(g - np.eye(r)).max() > 1e-8:
                    raise NumericError("basis flagged orthonormal but A^T A != I",
                                       deviation=float(np.abs(g - np.eye(r)).max()))
            if self.c <= 0.0 or (r > 0 and np.min(d + self.c) <= 0.0):
                raise NumericError("orthonormal model is not positive definite",
                                   c=self.c)
            object.__setattr__(self, "pd_certified", True)

    @property
    def n_vars(self) -> int:
        return self.basis_a.shape[0]

    @property
    def rank(self) -> int:
        return self.basis_a.shape[1]

    @cached_property
    def logdet(self) -> float:
        """log det Omega via the matrix determinant lemma (r x r work).

        Computed once per model and shared by all likelihood evaluations.
        """
        if self.c <= 0.0:
            raise NumericError("log-determinant requires c > 0", c=self.c)
        n, r = self.basis_a.shape
        if r == 0:
            return n * np.log(self.c)
        m = np.eye(r) + (_gram(self.basis_a) * self.diag_d[None, :]) / self.c
        sign, val = np.linalg.slogdet(m)
        if sign <= 0:
            raise NumericError("determinant term is not positive; model is indefinite")
        return float(val + n * np.log(self.c))

    def _require_pd(self, op: str):
        if not self.pd_certified:
            raise NumericError(f"{op} requires a positive-definiteness-certified model")


def orthonormalize(model: LowRankPrecision) -> LowRankPrecision:
    """Rewrite A diag(d) A^T with d <= 0 in an orthonormal basis.

    Takes the thin SVD of A sqrt(-d) and folds the singular values back in
    as -s^2, so the materialized matrix is unchanged.  Certifies positive
    definiteness as a side effect.
    """
    d = model.diag_d
    if d.size and d.max() > 0.0:
        raise NumericError("orthonormalize requires a non-positive diagonal",
                           max_diag=float(d.max()))
    keep = d < 0.0
    a = model.basis_a
    if _is_sparse(a):
        a = a.toarray()
    b = a[:, keep] * np.sqrt(-d[keep])[None, :]
    if b.shape[1] == 0:
        return LowRankPrecision(basis_a=np.zeros((model.n_vars, 0)),
                                diag_d=np.zeros(0), c=model.c, mean=model.mean,
                                orthonormal=True, bounds=model.bounds)
    u, s, _ = np.linalg.svd(b, full_matrices=False)
    tol = max(b.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    nz = s > tol
    return LowRankPrecision(basis_a=u[:, nz], diag_d=-s[nz] ** 2,
                            c=model.c, mean=model.mean,
                            orthonormal=True, bounds=model.bounds)


def log_likelihood(model: LowRankPrecision, x: np.ndarray) -> float:
    """log det Omega - (x - mu)^T Omega (x - mu), evaluated in O(N r)."""
    model._require_pd("log_likelihood")
    z = np.asarray(x, dtype=np.float64).ravel() - model.mean
    if z.shape != (model.n_vars,):
        raise UsageError("sample length must match N", n=model.n_vars, got=z.shape)
    w = model.basis_a.T @ z
    quad = float(w @ (model.diag_d * w) + model.c * (z @ z))
    return model.logdet - quad


def average_log_likelihood(model: LowRankPrecision, samples) -> float:
    """Mean log-likelihood over sample columns (an N x T array or DataMatrix)."""
    values = getattr(samples, "values", samples)
    z = np.asarray(values, dtype=np.float64) - model.mean[:, None]
    w = model.basis_a.T @ z
    quad = np.einsum("rt,r,rt->t", w, model.diag_d, w) + model.c * (z * z).sum(axis=0)
    model._require_pd("average_log_likelihood")
    return float(model.logdet - quad.mean())


def _check_partition(n: int, part1, part2):
    p1 = np.asarray(part1, dtype=np.intp)
    p2 = np.asarray(part2, dtype=np.intp)
    seen = np.zeros(n, dtype=bool)
    for p in (p1, p2):
        if p.size and (p.min() < 0 or p.max() >= n):
            raise UsageError("partition index out of range", n=n)
        if np.any(seen[p]):
            raise UsageError("partition sets overlap")
        seen[p] = True
    if not seen.all():
        raise UsageError("partition does not cover all variables")
    return p1, p2


def conditional(model: LowRankPrecision, part1, part2, x2):
    """Conditional distribution of x[part1] given x[part2] = x2.

    Returns the conditional mean and the conditional precision, which is the
    (1,1) block of the full precision and stays in factored form with a
    row-subset (non-orthonormal) basis.

    The mean is mu_1 - Omega_11^{-1} Omega_12 (x2 - mu_2).  Because the
    inverse is applied to a vector in the column span of U1, it reduces to an
    r x r linear solve against diag(d) U1^T U1 + c I, costing O(|part1| r^2).
    A per-component gain d_t/(d_t + c) would only be exact if the part1 rows
    of the basis were themselves orthonormal, which a row subset is not.
    """
    if not model.orthonormal:
        raise UsageError("conditional requires an orthonormal model")
    model._require_pd("conditional")
    p1, p2 = _check_partition(model.n_vars, part1, part2)
    x2 = np.asarray(x2, dtype=np.float64).ravel()
    if x2.shape != (p2.size,):
        raise UsageError("x2 length must match part2", expected=p2.size, got=x2.shape)
    a = model.basis_a.toarray() if _is_sparse(model.basis_a) else model.basis_a
    u1 = a[p1]
    u2 = a[p2]
    r = model.rank
    if r:
        w = model.diag_d * (u2.T @ (x2 - model.mean[p2]))
        gram = u1.T @ u1
        s = np.linalg.solve(model.diag_d[:, None] * gram + model.c * np.eye(r), w)
        mu_1_given_2 = model.mean[p1] - u1 @ s
    else:
        mu_1_given_2 = model.mean[p1].copy()
    cond = LowRankPrecision(basis_a=np.asarray(u1), diag_d=model.diag_d.copy(),
                            c=model.c, mean=mu_1_given_2,
                            orthonormal=False, pd_certified=True)
    return mu_1_given_2, cond


def partial_correlation(model: LowRankPrecision, n1: int, n2: int) -> float:
    """Signed partial correlation omega_12 / sqrt(omega_11 omega_22) in O(r)."""
    model._require_pd("partial_correlation")
    n = model.n_vars
    if not (0 <= n1 < n and 0 <= n2 < n):
        raise UsageError("variable index out of range", n=n, n1=n1, n2=n2)
    if n1 == n2:
        raise UsageError("partial correlation needs two distinct variables")
    a1 = _row(model.basis_a, n1)
    a2 = _row(model.basis_a, n2)
    d = model.diag_d
    off = float(np.sum(d * a1 * a2))
    d1 = float(np.sum(d * a1 * a1) + model.c)
    d2 = float(np.sum(d * a2 * a2) + model.c)
    if d1 <= 0.0 or d2 <= 0.0:
        raise NumericError("non-positive diagonal precision entry")
    return off / np.sqrt(d1 * d2)


def screen_unimportant(model: LowRankPrecision, epsilon: float):
    """Detect variables whose every partial correlation magnitude is <= epsilon.

    Computes the per-variable score
        q(n) = sum_t |d_t a_nt| * max_m |a_mt| / sqrt(r(n) * min_m r(m)),
        r(n) = sum_t d_t a_nt^2 + c,
    in O(N r) total; q(n) upper-bounds every partial correlation involving n,
    so {n : q(n) <= epsilon} is a sound unimportant set.
    """
    model._require_pd("screen_unimportant")
    if epsilon <= 0:
        raise UsageError("epsilon must be positive", epsilon=epsilon)
    a = model.basis_a
    n, r = a.shape
    diag_prec = np.asarray((_squared(a) @ model.diag_d)).ravel() + model.c
    if diag_prec.min() <= 0.0:
        raise NumericError("non-positive diagonal precision entry; model not certified")
    if r == 0:
        q = np.zeros(n)
    else:
        a_abs = abs(a)
        col_max = a_abs.max(axis=0)
        if _is_sparse(a):
            col_max = np.asarray(col_max.todense()).ravel()
        numer = np.asarray(a_abs @ (np.abs(model.diag_d) * col_max)).ravel()
        q = numer / np.sqrt(diag_prec * diag_prec.min())
    unimportant = np.flatnonzero(q <= epsilon)
    return unimportant, q


def important_edges(model: LowRankPrecision, epsilon: float, max_edges: int,
                    candidates=None):
    """Pairs of non-screened variables with |partial correlation| > epsilon.

    Returns (n1, n2, value) tuples with n1 < n2, sorted by descending
    magnitude and truncated to ``max_edges``.  ``candidates`` defaults to the
    complement of the screened set at the same epsilon.
    """
    model._require_pd("important_edges")
    if candidates is None:
        screened, _ = screen_unimportant(model, epsilon)
        mask = np.ones(model.n_vars, dtype=bool)
        mask[screened] = False
        candidates = np.flatnonzero(mask)
    else:
        candidates = np.asarray(candidates, dtype=np.intp)
    m = candidates.size
    if m < 2 or model.rank == 0:
        return []
    a = model.basis_a[candidates]
    if _is_sparse(a):
        a = a.toarray()
    a = np.asarray(a)
    block = (a * model.diag_d[None, :]) @ a.T
    diag = block.diagonal() + model.c
    denom = np.sqrt(np.outer(diag, diag))
    pc = block / denom
    iu, ju = np.triu_indices(m, k=1)
    vals = pc[iu, ju]
    keep = np.abs(vals) > epsilon
    order = np.argsort(-np.abs(vals[keep]), kind="stable")
    edges = [(int(candidates[iu[k]]), int(candidates[ju[k]]), float(vals[k]))
             for k in np.flatnonzero(keep)[order]]
    return edges[:max_edges]


def materialize_dense(model: LowRankPrecision, guard: int = DENSE_GUARD) -> np.ndarray:
    """Explicit N x N matrix; test/inspection support only, refuses large N."""
    n = model.n_vars
    if n > guard:
        raise UsageError("refusing to materialize a large model", n=n, guard=guard)
    a = model.basis_a
    if _is_sparse(a):
        a = a.toarray()
    a = np.asarray(a)
    return (a * model.diag_d[None, :]) @ a.T + model.c * np.eye(n)


# -- JSON serialization -------------------------------------------------------

def _model_to_dict(model: LowRankPrecision) -> dict:
    a = model.basis_a
    if _is_sparse(a):
        coo = a.tocoo()
        basis = {"rows": coo.row.tolist(), "cols": coo.col.tolist(),
                 "vals": coo.data.tolist()}
    else:
        basis = np.asarray(a).tolist()
    doc = {
        "format_version": 1,
        "n": model.n_vars,
        "r": model.rank,
        "c": model.c,
        "orthonormal": model.orthonormal,
        "mean": model.mean.tolist(),
        "diag": model.diag_d.tolist(),
        "basis": basis,
    }
    if model.bounds is not None:
        doc["bounds"] = {"alpha": model.bounds.alpha, "beta": model.bounds.beta}
    return doc


def save_model(model: LowRankPrecision, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_model_to_dict(model), fh)
        fh.write("\n")


def save_model_with_rho(model: LowRankPrecision, path, rho: float) -> None:
    """save_model plus the fitting rho, the default threshold for sparsify."""
    doc = _model_to_dict(model)
    doc["rho"] = float(rho)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model_with_rho(path):
    """Load a model and the stored fitting rho (None when absent)."""
    model = load_model(path)
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    rho = doc.get("rho")
    return model, (float(rho) if rho is not None else None)


def _load_basis(doc, n, r):
    basis = doc["basis"]
    if isinstance(basis, dict):
        for key in ("rows", "cols", "vals"):
            if key not in basis:
                raise DataError("sparse basis missing key", key=key)
        rows = np.asarray(basis["rows"], dtype=np.intp)
        cols = np.asarray(basis["cols"], dtype=np.intp)
        vals = np.asarray(basis["vals"], dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise DataError("sparse basis arrays must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= n
                          or cols.min() < 0 or cols.max() >= r):
            raise DataError("sparse basis index out of range")
        return sp.coo_matrix((vals, (rows, cols)), shape=(n, r)).tocsr()
    arr = np.asarray(basis, dtype=np.float64)
    if arr.size == 0:
        arr = arr.reshape(n, 0)
    if arr.shape != (n, r):
        raise DataError("basis shape mismatch", expected=(n, r), got=arr.shape)
    return arr


def load_model(path) -> LowRankPrecision:
    """Load and validate a model JSON file; invariant failures raise DataError."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError("model file is not valid JSON", detail=str(exc)) from None
    if not isinstance(doc, dict) or doc.get("format_version") != 1:
        raise DataError("unsupported model format", got=doc.get("format_version")
                        if isinstance(doc, dict) else type(doc).__name__)
    try:
        n = int(doc["n"])
        r = int(doc["r"])
        c = float(doc["c"])
        orthonormal = bool(doc["orthonormal"])
        mean = np.asarray(doc["mean"], dtype=np.float64)
        diag = np.asarray(doc["diag"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError("model schema violation", detail=str(exc)) from None
    if mean.shape != (n,):
        raise DataError("mean length mismatch", expected=n, got=mean.shape)
    if diag.shape != (r,):
        raise DataError("diag length mismatch", expected=r, got=diag.shape)
    basis = _load_basis(doc, n, r)
    bounds = None
    if "bounds" in doc:
        try:
            bounds = EigenBounds(float(doc["bounds"]["alpha"]),
                                 float(doc["bounds"]["beta"]))
        except (KeyError, TypeError, ValueError, NumericError) as exc:
            raise DataError("invalid bounds in model file", detail=str(exc)) from None
    try:
        return LowRankPrecision(basis_a=basis, diag_d=diag, c=c, mean=mean,
                                orthonormal=orthonormal, bounds=bounds)
    except NumericError as exc:
        raise DataError("model file violates invariants", detail=exc.message) from None
