import json

import numpy as np
import pytest

from specprec import (DataError, DataMatrix, EigenBounds, LowRankPrecision,
                      NumericError, UsageError, average_log_likelihood,
                      conditional, important_edges, load_model,
                      log_likelihood, materialize_dense, orthonormalize,
                      partial_correlation, save_model, screen_unimportant,
                      soft_threshold_basis)
from specprec.oracle import dense_conditional, dense_loglik

from conftest import random_orthonormal_model


def iso_model(n, c=1.0, mean=None):
    return LowRankPrecision(basis_a=np.zeros((n, 0)), diag_d=np.zeros(0),
                            c=c, mean=np.zeros(n) if mean is None else mean,
                            orthonormal=True)


def test_loglik_standard_normal_mode():
    m = iso_model(3)
    assert log_likelihood(m, np.zeros(3)) == 0.0


def test_loglik_isotropic_formula(rng):
    m = iso_model(5, c=2.5)
    x = rng.standard_normal(5)
    expected = 5 * np.log(2.5) - 2.5 * (x @ x)
    assert abs(log_likelihood(m, x) - expected) < 1e-12


def test_loglik_dense_oracle(rng):
    for _ in range(10):
        m = random_orthonormal_model(rng, 12, 4, c=1.3,
                                     mean=rng.standard_normal(12))
        x = rng.standard_normal(12)
        got = log_likelihood(m, x)
        want = dense_loglik(materialize_dense(m), m.mean, x)
        assert abs(got - want) <= 1e-9 * max(1.0, abs(want))


def test_average_loglik_matches_mean(rng):
    m = random_orthonormal_model(rng, 8, 3)
    xs = rng.standard_normal((8, 6))
    avg = average_log_likelihood(m, DataMatrix(values=xs))
    per = np.mean([log_likelihood(m, xs[:, i]) for i in range(6)])
    assert abs(avg - per) < 1e-10


def test_loglik_refuses_uncertified(rng):
    m = LowRankPrecision(basis_a=rng.standard_normal((4, 2)),
                         diag_d=np.array([-0.5, -0.2]), c=1.0,
                         mean=np.zeros(4))
    assert not m.pd_certified
    with pytest.raises(NumericError):
        log_likelihood(m, np.zeros(4))


def test_conditional_rank_zero():
    m = iso_model(4, c=2.0)
    mu, cond = conditional(m, [0, 1], [2, 3], np.array([5.0, -1.0]))
    np.testing.assert_array_equal(mu, [0.0, 0.0])
    np.testing.assert_allclose(materialize_dense(cond), 2.0 * np.eye(2))


def test_conditional_empty_part2(rng):
    m = random_orthonormal_model(rng, 5, 2)
    mu, cond = conditional(m, np.arange(5), [], np.zeros(0))
    np.testing.assert_array_equal(mu, m.mean)
    np.testing.assert_allclose(materialize_dense(cond), materialize_dense(m),
                               atol=1e-12)


def test_conditional_dense_oracle(rng):
    for _ in range(10):
        m = random_orthonormal_model(rng, 10, 3, c=1.2,
                                     mean=rng.standard_normal(10))
        perm = rng.permutation(10)
        p1, p2 = perm[:4], perm[4:]
        x2 = rng.standard_normal(6)
        mu, cond = conditional(m, p1, p2, x2)
        dense_mu, dense_prec = dense_conditional(materialize_dense(m), m.mean,
                                                 p1, p2, x2)
        np.testing.assert_allclose(mu, dense_mu, atol=1e-9)
        np.testing.assert_allclose(materialize_dense(cond), dense_prec,
                                   atol=1e-9)


def test_conditional_rejects_bad_partition(rng):
    m = random_orthonormal_model(rng, 6, 2)
    with pytest.raises(UsageError):
        conditional(m, [0, 1], [1, 2, 3, 4, 5], np.zeros(5))
    with pytest.raises(UsageError):
        conditional(m, [0, 1], [3, 4, 5], np.zeros(3))


def test_conditional_requires_orthonormal(rng):
    m = LowRankPrecision(basis_a=rng.standard_normal((4, 1)),
                         diag_d=np.array([-0.1]), c=1.0, mean=np.zeros(4),
                         pd_certified=True)
    with pytest.raises(UsageError):
        conditional(m, [0, 1], [2, 3], np.zeros(2))


def rank_one_pair_model():
    a = np.array([[1.0], [1.0]]) / np.sqrt(2.0)
    return LowRankPrecision(basis_a=a, diag_d=np.array([-0.25]), c=1.0,
                            mean=np.zeros(2), orthonormal=True)


def test_partial_correlation_hand_value():
    m = rank_one_pair_model()
    # omega_12 = -1/8, omega_nn = 7/8 -> value -1/7
    got = partial_correlation(m, 0, 1)
    assert abs(got - (-1.0 / 7.0)) < 1e-14
    dense = materialize_dense(m)
    want = dense[0, 1] / np.sqrt(dense[0, 0] * dense[1, 1])
    assert abs(got - want) < 1e-14


def test_partial_correlation_symmetric_and_zero_for_iso(rng):
    m = random_orthonormal_model(rng, 7, 3)
    for _ in range(5):
        i, j = rng.choice(7, size=2, replace=False)
        assert partial_correlation(m, int(i), int(j)) == pytest.approx(
            partial_correlation(m, int(j), int(i)), rel=1e-12)
    iso = iso_model(4)
    assert partial_correlation(iso, 0, 3) == 0.0


def test_partial_correlation_index_errors(rng):
    m = random_orthonormal_model(rng, 4, 2)
    with pytest.raises(UsageError):
        partial_correlation(m, 0, 4)
    with pytest.raises(UsageError):
        partial_correlation(m, 2, 2)


def test_screen_rank_zero():
    m = iso_model(6)
    s, q = screen_unimportant(m, 0.01)
    np.testing.assert_array_equal(s, np.arange(6))
    np.testing.assert_array_equal(q, np.zeros(6))


def test_screen_threshold_dominance(rng):
    m = random_orthonormal_model(rng, 20, 3)
    _, q = screen_unimportant(m, 1e-9)
    s, _ = screen_unimportant(m, float(q.max()) + 1e-12)
    np.testing.assert_array_equal(s, np.arange(20))


def test_screen_soundness_dense(rng):
    # every pair inside the screened set must have |partial corr| <= eps
    for _ in range(5):
        m = random_orthonormal_model(rng, 50, 4, c=1.5)
        _, q = screen_unimportant(m, 1.0)
        eps = float(np.median(q))
        if eps <= 0:
            continue
        screened, _ = screen_unimportant(m, eps)
        dense = materialize_dense(m)
        dd = np.sqrt(np.outer(dense.diagonal(), dense.diagonal()))
        pc = np.abs(dense / dd)
        for i in screened:
            for j in screened:
                if i < j:
                    assert pc[i, j] <= eps + 1e-12


def test_important_edges_rank_one():
    m = rank_one_pair_model()
    edges = important_edges(m, 0.1, 10, candidates=[0, 1])
    assert len(edges) == 1
    n1, n2, v = edges[0]
    assert (n1, n2) == (0, 1)
    assert abs(v - (-1.0 / 7.0)) < 1e-12


def test_important_edges_empty_for_isotropic():
    assert important_edges(iso_model(5), 0.1, 10) == []


def test_important_edges_ordering(rng):
    m = random_orthonormal_model(rng, 12, 3)
    edges = important_edges(m, 1e-6, 1000, candidates=np.arange(12))
    mags = [abs(v) for _, _, v in edges]
    assert mags == sorted(mags, reverse=True)
    assert all(n1 < n2 for n1, n2, _ in edges)
    assert len({(n1, n2) for n1, n2, _ in edges}) == len(edges)


def test_materialize_examples():
    np.testing.assert_allclose(materialize_dense(iso_model(3, c=0.5)),
                               0.5 * np.eye(3))
    a = np.eye(4)[:, :1]
    m = LowRankPrecision(basis_a=a, diag_d=np.array([-0.5]), c=1.0,
                         mean=np.zeros(4), orthonormal=True)
    np.testing.assert_allclose(materialize_dense(m),
                               np.diag([0.5, 1.0, 1.0, 1.0]))


def test_materialize_guard(rng):
    m = iso_model(10)
    with pytest.raises(UsageError):
        materialize_dense(m, guard=5)


def test_orthonormalize_identity_on_orthonormal(rng):
    m = random_orthonormal_model(rng, 9, 3)
    m2 = orthonormalize(m)
    assert m2.orthonormal
    np.testing.assert_allclose(materialize_dense(m2), materialize_dense(m),
                               atol=1e-10)


def test_orthonormalize_rank_zero():
    m = iso_model(4, c=2.0)
    m2 = orthonormalize(m)
    assert m2.rank == 0 and m2.c == 2.0


def test_orthonormalize_sparse_thresholded(rng):
    m = random_orthonormal_model(rng, 40, 5)
    sparse_u = soft_threshold_basis(np.asarray(m.basis_a), 1.0)
    raw = LowRankPrecision(basis_a=sparse_u, diag_d=m.diag_d, c=m.c,
                           mean=m.mean, pd_certified=True)
    fixed = orthonormalize(raw)
    assert fixed.orthonormal
    np.testing.assert_allclose(materialize_dense(fixed),
                               materialize_dense(raw), atol=1e-9)


def test_orthonormalize_rejects_positive_diag(rng):
    m = LowRankPrecision(basis_a=np.eye(3)[:, :1], diag_d=np.array([0.5]),
                         c=1.0, mean=np.zeros(3))
    with pytest.raises(NumericError):
        orthonormalize(m)


def test_save_load_roundtrip(tmp_path, rng):
    m = random_orthonormal_model(rng, 6, 2, mean=rng.standard_normal(6))
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    np.testing.assert_array_equal(back.basis_a, np.asarray(m.basis_a))
    np.testing.assert_array_equal(back.diag_d, m.diag_d)
    np.testing.assert_array_equal(back.mean, m.mean)
    assert back.c == m.c and back.orthonormal == m.orthonormal
    assert back.bounds == m.bounds


def test_load_minimal_isotropic(tmp_path):
    doc = {"format_version": 1, "n": 2, "r": 0, "c": 1.0, "orthonormal": True,
           "mean": [0.0, 0.0], "diag": [], "basis": []}
    path = tmp_path / "iso.json"
    path.write_text(json.dumps(doc))
    m = load_model(path)
    np.testing.assert_allclose(materialize_dense(m), np.eye(2))


@pytest.mark.parametrize("mutate", [
    lambda d: d.update(mean=[0.0]),                     # wrong mean length
    lambda d: d.update(diag=[-0.5, -0.2]),              # wrong diag length
    lambda d: d.update(c=-1.0),                         # c <= 0 with orthonormal
    lambda d: d.update(format_version=99),
    lambda d: d.update(basis=[[1.0, 0.0]]),             # wrong basis shape
    lambda d: d.pop("c"),
])
def test_load_rejects_invalid(tmp_path, mutate):
    doc = {"format_version": 1, "n": 2, "r": 1, "c": 1.0, "orthonormal": True,
           "mean": [0.0, 0.0], "diag": [-0.5], "basis": [[1.0], [0.0]]}
    mutate(doc)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(DataError):
        load_model(path)


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "g.json"
    path.write_text("not json {")
    with pytest.raises(DataError):
        load_model(path)


def test_loglik_determinant_cached(rng):
    m = random_orthonormal_model(rng, 30, 5)
    first = m.logdet
    assert m.logdet is not None
    assert "logdet" in m.__dict__  # cached after first evaluation
    assert m.logdet == first
