import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specprec import (DataMatrix, NumericError, UsageError, center,
                      eigen_bounds, isotropic_fit, materialize_dense,
                      riccati_fit, select_rho_by_validation, solution_path,
                      thin_svd, tikhonov_fit)
from specprec.oracle import dense_riccati, dense_tikhonov, kkt_residual

from conftest import centered_data, sample_cov

GOLDEN_RATIO_CONJ = (np.sqrt(5.0) - 1.0) / 2.0


def test_thin_svd_zero_data():
    d = center(DataMatrix(values=np.zeros((5, 3))))
    b = thin_svd(d)
    assert b.rank == 0
    assert b.spec_norm_cov == 0.0


def test_thin_svd_rank_one():
    x = np.array([3.0, 0.0, 4.0, 0.0])
    data = DataMatrix(values=np.column_stack([x, -x]), mean=np.zeros(4))
    b = thin_svd(data)
    assert b.rank == 1
    np.testing.assert_allclose(b.data_singvals, [np.sqrt(2.0) * 5.0])
    np.testing.assert_allclose(b.cov_eigvals, [25.0])
    np.testing.assert_allclose(np.abs(b.basis_u[:, 0]), np.abs(x) / 5.0, atol=1e-14)


def test_thin_svd_reconstruction(rng):
    d = centered_data(rng, 8, 4)
    b = thin_svd(d)
    x = d.values
    # U spans the column space, so the projector residual checks reconstruction
    resid = np.linalg.norm(x - b.basis_u @ (b.basis_u.T @ x))
    assert resid <= 1e-10 * np.linalg.norm(x)
    r = b.rank
    assert np.abs(b.basis_u.T @ b.basis_u - np.eye(r)).max() <= 1e-12
    cov = sample_cov(d)
    np.testing.assert_allclose(
        (b.basis_u * b.cov_eigvals) @ b.basis_u.T, cov, atol=1e-12)


def test_thin_svd_requires_centered(rng):
    with pytest.raises(UsageError):
        thin_svd(DataMatrix(values=rng.standard_normal((4, 3))))


def test_thin_svd_gram_path_matches_direct(rng):
    # tall data goes through the T x T Gram matrix; check against the
    # dense covariance spectrum
    d = centered_data(rng, 2048, 8)
    b = thin_svd(d)
    cov = sample_cov(d)
    w = np.sort(np.linalg.eigvalsh(cov))[::-1][:b.rank]
    np.testing.assert_allclose(np.sort(b.cov_eigvals)[::-1], w,
                               rtol=1e-9, atol=1e-12)
    assert np.abs(b.basis_u.T @ b.basis_u - np.eye(b.rank)).max() <= 1e-10


def _basis_from_eigvals(d):
    r = len(d)
    n = r + 2
    u = np.eye(n)[:, :r]
    s = np.sqrt(np.asarray(d, dtype=float) * 4)  # T = 4
    from specprec import SpectralBasis
    order = np.argsort(-s)
    return SpectralBasis(basis_u=u[:, order], data_singvals=s[order],
                         cov_eigvals=(s ** 2 / 4)[order], n_vars=n,
                         n_samples=4, mean=np.zeros(n))


def test_riccati_rank_zero_isotropic():
    b = _basis_from_eigvals([])
    m = riccati_fit(b, 4.0)
    assert m.rank == 0
    assert m.c == 0.5
    np.testing.assert_allclose(materialize_dense(m), 0.5 * np.eye(2))


def test_riccati_scalar_oracle():
    b = _basis_from_eigvals([1.0])
    m = riccati_fit(b, 1.0)
    lam = m.diag_d[0] + m.c
    assert abs(lam - GOLDEN_RATIO_CONJ) < 1e-12
    assert abs(m.diag_d[0] - (-0.3819660113)) < 1e-9


@given(st.lists(st.floats(0.0, 1e3), min_size=1, max_size=6),
       st.floats(1e-3, 1e2))
@settings(max_examples=60, deadline=None)
def test_riccati_kkt_per_eigenvalue(ds, rho):
    ds = sorted(ds, reverse=True)
    from specprec.spectral import _riccati_diag
    diag, c = _riccati_diag(np.asarray(ds, dtype=float), rho)
    lam = diag + c
    d = np.asarray(ds)
    resid = np.abs(1.0 / lam - d - rho * lam)
    assert np.all(resid <= 1e-12 * (d + rho * lam + 1.0 / lam))


@given(st.floats(1e-6, 1e3), st.floats(1e-3, 1e3))
@settings(max_examples=100, deadline=None)
def test_riccati_stable_form_matches_naive(d, rho):
    # the naive spectral formula cancels badly for d >> rho; the stable
    # root form must agree where the naive form is still accurate
    if d / rho > 1e3:
        return
    from specprec.spectral import _riccati_diag
    diag, c = _riccati_diag(np.array([d]), rho)
    naive = np.sqrt(1.0 / rho + d * d / (4.0 * rho * rho)) - d / (2.0 * rho) - 1.0 / np.sqrt(rho)
    assert abs(diag[0] - naive) <= 1e-9 * max(abs(naive), 1.0 / np.sqrt(rho))


def test_tikhonov_examples():
    b = _basis_from_eigvals([1.0])
    m = tikhonov_fit(b, 1.0)
    assert abs(m.diag_d[0] + 0.5) < 1e-14
    assert abs((m.diag_d[0] + m.c) - 0.5) < 1e-14
    b0 = _basis_from_eigvals([])
    m0 = tikhonov_fit(b0, 2.0)
    np.testing.assert_allclose(materialize_dense(m0), 0.5 * np.eye(2))


def test_tikhonov_dense_oracle(rng):
    d = centered_data(rng, 6, 3)
    b = thin_svd(d)
    m = tikhonov_fit(b, 0.7)
    cov = sample_cov(d)
    np.testing.assert_allclose(materialize_dense(m),
                               np.linalg.inv(cov + 0.7 * np.eye(6)),
                               atol=1e-10)


def test_riccati_dense_oracle_and_kkt(rng):
    d = centered_data(rng, 7, 4)
    b = thin_svd(d)
    cov = sample_cov(d)
    for rho in (0.1, 1.0, 10.0):
        m = riccati_fit(b, rho)
        dense = materialize_dense(m)
        np.testing.assert_allclose(dense, dense_riccati(cov, rho), atol=1e-10)
        assert kkt_residual(dense, cov, rho) < 1e-10


def test_rho_must_be_positive(rng):
    b = thin_svd(centered_data(rng, 4, 3))
    for bad in (0.0, -1.0):
        with pytest.raises(UsageError):
            riccati_fit(b, bad)
        with pytest.raises(UsageError):
            tikhonov_fit(b, bad)


def test_eigen_bounds_examples():
    eb = eigen_bounds(0.0, 4.0, "riccati")
    assert eb.alpha == eb.beta == 0.5
    eb = eigen_bounds(1.0, 1.0, "riccati")
    assert abs(eb.alpha - GOLDEN_RATIO_CONJ) < 1e-12 and eb.beta == 1.0
    eb = eigen_bounds(1.0, 1.0, "tikhonov")
    assert eb.alpha == 0.5 and eb.beta == 1.0


def test_fitted_eigenvalues_within_bounds(rng):
    for _ in range(5):
        d = centered_data(rng, 9, 5)
        b = thin_svd(d)
        for fit in (riccati_fit, tikhonov_fit):
            m = fit(b, 0.3)
            w = np.linalg.eigvalsh(materialize_dense(m))
            assert w.min() >= m.bounds.alpha - 1e-10
            assert w.max() <= m.bounds.beta + 1e-10


def test_riccati_eigenvalue_monotonicity(rng):
    b = thin_svd(centered_data(rng, 10, 6))
    m = riccati_fit(b, 0.5)
    lam = m.diag_d + m.c
    d = b.cov_eigvals
    # eigenvalue map is strictly decreasing in d, all values in (0, 1/sqrt(rho)]
    assert np.all(np.diff(lam[np.argsort(d)]) <= 0)
    assert np.all(lam > 0) and np.all(lam <= 1.0 / np.sqrt(0.5) + 1e-15)


def test_path_singleton_consistency(rng):
    b = thin_svd(centered_data(rng, 8, 4))
    path = solution_path(b, [0.37], "riccati")
    direct = riccati_fit(b, 0.37)
    entry = path.model_at(0)
    np.testing.assert_array_equal(entry.diag_d, direct.diag_d)
    assert entry.c == direct.c
    assert entry.basis_a is direct.basis_a


def test_path_shared_basis(rng):
    b = thin_svd(centered_data(rng, 8, 4))
    path = solution_path(b, [0.1, 1.0], "tikhonov")
    assert path.model_at(0).basis_a is path.model_at(1).basis_a


def test_path_empty_grid_rejected(rng):
    b = thin_svd(centered_data(rng, 4, 3))
    with pytest.raises(UsageError):
        solution_path(b, [], "riccati")


def test_select_rho_single_entry(rng):
    d = centered_data(rng, 6, 4)
    b = thin_svd(d)
    path = solution_path(b, [0.8], "riccati")
    val = DataMatrix(values=rng.standard_normal((6, 5)))
    rho, table = select_rho_by_validation(path, val)
    assert rho == 0.8
    assert table.shape == (1, 2)


def test_select_rho_argmax(rng):
    d = centered_data(rng, 12, 6)
    b = thin_svd(d)
    path = solution_path(b, np.logspace(-2, 1, 12), "riccati")
    val = DataMatrix(values=rng.standard_normal((12, 8)))
    rho, table = select_rho_by_validation(path, val)
    best = table[np.argmax(table[:, 1]), 0]
    assert rho == best
    assert table[table[:, 0] == rho, 1][0] >= table[:, 1].max() - 1e-12


def test_select_rho_dimension_mismatch(rng):
    b = thin_svd(centered_data(rng, 6, 4))
    path = solution_path(b, [1.0], "riccati")
    with pytest.raises(UsageError):
        select_rho_by_validation(path, DataMatrix(values=np.zeros((5, 3))))


def test_isotropic_fit(rng):
    d = centered_data(rng, 6, 4)
    b = thin_svd(d)
    iso = isotropic_fit(b)
    assert iso.rank == 0
    cov_trace = np.trace(sample_cov(d))
    assert abs(iso.c - 6 / cov_trace) < 1e-10
