"""Constraint-map, eigensolve, and orthonormalization checks, each against
an independent dense oracle."""

import numpy as np
import pytest
import scipy.linalg

from specbundle import (ConstraintMap, DimensionError, RankError,
                        is_orthonormal, opnorm_adjoint, orthonormalize,
                        symmetrize, top_eigs)

from conftest import dense_constraints, rand_sparse_map, symm


def test_symmetrize_exact():
    rng = np.random.default_rng(0)
    B = rng.normal(size=(5, 5))
    S = symmetrize(B)
    assert np.array_equal(S, S.T)
    # symmetric input is a fixed point
    assert np.array_equal(symmetrize(S), S)


def test_symmetrize_rejects_nonsquare():
    with pytest.raises(DimensionError):
        symmetrize(np.zeros((2, 3)))


# -- constraint map ---------------------------------------------------------

def test_apply_diagonal_map_identity():
    amap = ConstraintMap.from_triples(3, [[(i, i, 1.0)] for i in range(3)])
    assert np.array_equal(amap.apply(np.eye(3)), np.ones(3))


def test_apply_zero_matrix():
    rng = np.random.default_rng(1)
    amap = rand_sparse_map(rng, 5, 4)
    assert np.array_equal(amap.apply(np.zeros((5, 5))), np.zeros(4))


def test_apply_matches_double_loop_oracle():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = int(rng.integers(2, 8))
        m = int(rng.integers(1, 6))
        amap = rand_sparse_map(rng, n, m)
        X = symm(rng.normal(size=(n, n)))
        mats = dense_constraints(amap)
        want = np.array([sum(mats[k, i, j] * X[i, j]
                             for i in range(n) for j in range(n))
                         for k in range(m)])
        got = amap.apply(X)
        assert np.abs(got - want).max() <= 1e-10 * (1.0 + np.abs(want).max())


def test_adjoint_matches_accumulation_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(2, 8))
        m = int(rng.integers(1, 6))
        amap = rand_sparse_map(rng, n, m)
        y = rng.normal(size=m)
        want = np.tensordot(y, dense_constraints(amap), axes=1)
        got = amap.adjoint(y)
        assert np.abs(got - want).max() <= 1e-12 * (1.0 + np.abs(want).max())
        assert np.array_equal(got, got.T)


def test_adjoint_consistency_inner_products():
    # <A(X), y> == <X, A* y> for random X, y
    rng = np.random.default_rng(4)
    for _ in range(30):
        n = int(rng.integers(2, 9))
        m = int(rng.integers(1, 7))
        amap = rand_sparse_map(rng, n, m)
        X = symm(rng.normal(size=(n, n)))
        y = rng.normal(size=m)
        lhs = float(amap.apply(X) @ y)
        rhs = float(np.sum(X * amap.adjoint(y)))
        assert abs(lhs - rhs) <= 1e-10 * (1.0 + abs(lhs))


def test_slack_zero_y_returns_C():
    rng = np.random.default_rng(5)
    amap = rand_sparse_map(rng, 4, 3)
    C = symm(rng.normal(size=(4, 4)))
    assert np.array_equal(amap.slack(C, np.zeros(3)), C)


def test_slack_single_constraint():
    amap = ConstraintMap.from_triples(2, [[(0, 0, 1.0)]])
    got = amap.slack(np.zeros((2, 2)), np.array([3.0]))
    want = np.array([[-3.0, 0.0], [0.0, 0.0]])
    assert np.array_equal(got, want)


def test_congruence_matches_dense():
    rng = np.random.default_rng(6)
    for _ in range(15):
        n = int(rng.integers(3, 9))
        m = int(rng.integers(1, 5))
        p = int(rng.integers(1, n))
        amap = rand_sparse_map(rng, n, m)
        V = rng.normal(size=(n, p))
        mats = dense_constraints(amap)
        want = np.stack([V.T @ mats[k] @ V for k in range(m)])
        got = amap.congruence(V)
        assert np.abs(got - want).max() <= 1e-10 * (1.0 + np.abs(want).max())


def test_apply_factored_agrees_with_dense_product():
    rng = np.random.default_rng(7)
    amap = rand_sparse_map(rng, 7, 5)
    V = rng.normal(size=(7, 3))
    S = symm(rng.normal(size=(3, 3)))
    want = amap.apply(symm(V @ S @ V.T))
    got = amap.apply_factored(V, S)
    assert np.abs(got - want).max() <= 1e-9 * (1.0 + np.abs(want).max())


def test_gram_matches_naive():
    rng = np.random.default_rng(8)
    amap = rand_sparse_map(rng, 6, 5)
    mats = dense_constraints(amap)
    want = np.array([[np.sum(mats[i] * mats[j]) for j in range(5)]
                     for i in range(5)])
    got = amap.gram().toarray()
    assert np.abs(got - want).max() <= 1e-10 * (1.0 + np.abs(want).max())


def test_map_construction_errors():
    with pytest.raises(ValueError):
        ConstraintMap.from_triples(3, [[(0, 1, 1.0), (1, 0, 2.0)]])  # duplicate
    with pytest.raises(DimensionError):
        ConstraintMap.from_triples(3, [[(0, 3, 1.0)]])               # out of range
    with pytest.raises(DimensionError):
        ConstraintMap.from_triples(3, [])                            # no constraints
    with pytest.raises(DimensionError):
        ConstraintMap.from_triples(0, [[(0, 0, 1.0)]])
    amap = ConstraintMap.from_triples(3, [[(0, 0, 1.0)]])
    with pytest.raises(DimensionError):
        amap.apply(np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        amap.adjoint(np.zeros(2))


# -- eigensolves ------------------------------------------------------------

def test_top_eigs_diagonal():
    vals, vecs = top_eigs(np.diag([3.0, 2.0, 1.0]), 2)
    assert np.allclose(vals, [3.0, 2.0])
    # span of the first two coordinate axes
    P = vecs @ vecs.T
    want = np.diag([1.0, 1.0, 0.0])
    assert np.abs(P - want).max() <= 1e-12


def test_top_eigs_degenerate_eigenspace_span_only():
    vals, vecs = top_eigs(np.eye(3), 2)
    assert np.allclose(vals, [1.0, 1.0])
    assert is_orthonormal(vecs)
    # any orthonormal pair is acceptable; only the residual is contractual
    assert np.abs(np.eye(3) @ vecs - vecs * vals).max() <= 1e-12


def test_top_eigs_matches_full_decomposition():
    rng = np.random.default_rng(9)
    for _ in range(25):
        n = int(rng.integers(2, 12))
        r = int(rng.integers(1, n + 1))
        M = symm(rng.normal(size=(n, n)))
        vals, vecs = top_eigs(M, r)
        full = np.sort(scipy.linalg.eigvalsh(M))[::-1]
        assert np.abs(vals - full[:r]).max() <= 1e-9 * (1.0 + np.abs(full).max())
        assert np.all(np.diff(vals) <= 1e-12)
        assert is_orthonormal(vecs)
        resid = np.linalg.norm(M @ vecs - vecs * vals, "fro")
        assert resid <= 1e-8 * (1.0 + np.linalg.norm(M, "fro"))


def test_top_eigs_sign_convention():
    rng = np.random.default_rng(10)
    for _ in range(10):
        M = symm(rng.normal(size=(6, 6)))
        _, vecs = top_eigs(M, 3)
        for j in range(3):
            col = vecs[:, j]
            lead = col[np.abs(col) > 1e-12 * np.abs(col).max()][0]
            assert lead > 0


def test_top_eigs_errors():
    with pytest.raises(DimensionError):
        top_eigs(np.eye(3), 4)
    with pytest.raises(DimensionError):
        top_eigs(np.eye(3), 0)
    with pytest.raises(DimensionError):
        top_eigs(np.zeros((2, 3)), 1)


# -- orthonormalization -----------------------------------------------------

def _mgs(A, tol=1e-10):
    """Modified Gram-Schmidt span oracle."""
    Q = []
    for j in range(A.shape[1]):
        v = A[:, j].astype(float).copy()
        for q in Q:
            v -= (q @ v) * q
        nv = np.linalg.norm(v)
        if nv > tol * max(1.0, np.linalg.norm(A[:, j])):
            Q.append(v / nv)
    return np.array(Q).T if Q else np.zeros((A.shape[0], 0))


def test_orthonormalize_keeps_orthonormal_span():
    rng = np.random.default_rng(11)
    Q, _ = scipy.linalg.qr(rng.normal(size=(6, 3)), mode="economic")
    B = orthonormalize(Q)
    assert B.shape == (6, 3)
    assert np.abs(B @ B.T - Q @ Q.T).max() <= 1e-10


def test_orthonormalize_drops_duplicate_column():
    v = np.array([1.0, 2.0, 2.0])
    B = orthonormalize(np.column_stack([v, v]))
    assert B.shape == (3, 1)
    assert abs(abs(B[:, 0] @ (v / np.linalg.norm(v))) - 1.0) <= 1e-12


def test_orthonormalize_matches_gram_schmidt_span():
    rng = np.random.default_rng(12)
    for _ in range(20):
        A = rng.normal(size=(10, 3))
        B = orthonormalize(A)
        Q = _mgs(A)
        assert B.shape[1] == Q.shape[1]
        # same projector => same span
        assert np.abs(B @ B.T - Q @ Q.T).max() <= 1e-9
        assert np.abs(B.T @ B - np.eye(B.shape[1])).max() <= 1e-10


def test_orthonormalize_zero_input_raises():
    with pytest.raises(RankError):
        orthonormalize(np.zeros((4, 2)))


# -- operator norm ----------------------------------------------------------

def test_opnorm_single_constraint():
    amap = ConstraintMap.from_triples(2, [[(0, 1, 1.0)]])
    # dense matrix [[0,1],[1,0]] has Frobenius norm sqrt(2)
    assert abs(opnorm_adjoint(amap) - np.sqrt(2.0)) <= 1e-7


def test_opnorm_orthonormal_family_is_one():
    amap = ConstraintMap.from_triples(
        3, [[(0, 0, 1.0)], [(1, 1, 1.0)], [(2, 2, 1.0)]])
    assert abs(opnorm_adjoint(amap) - 1.0) <= 1e-7


def test_opnorm_matches_gram_eig_oracle():
    rng = np.random.default_rng(13)
    for _ in range(10):
        n = int(rng.integers(3, 8))
        m = int(rng.integers(2, 6))
        amap = rand_sparse_map(rng, n, m)
        mats = dense_constraints(amap)
        G = np.array([[np.sum(mats[i] * mats[j]) for j in range(m)]
                      for i in range(m)])
        want = float(np.sqrt(max(scipy.linalg.eigvalsh(G).max(), 0.0)))
        got = opnorm_adjoint(amap)
        assert abs(got - want) <= 1e-6 * (1.0 + want)
