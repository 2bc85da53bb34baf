"""Symmetric-matrix utilities and the sparse constraint map.

Everything downstream (objective evaluation, subproblem solves, bundle
updates) reduces to a handful of primitives collected here:

* applying the constraint map ``X -> (<A_1,X>, ..., <A_m,X>)`` and its
  adjoint ``y -> sum_i y_i A_i``,
* compressing the map through a tall orthonormal basis,
* partial symmetric eigensolves with a deterministic sign convention,
* rank-revealing orthonormalization.

Constraint matrices are sparse symmetric and stored as coordinate triples
over the upper triangle only; dense matrices are plain float64 ndarrays
kept exactly symmetric by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse


class DimensionError(ValueError):
    """Operands with incompatible shapes."""


class RankError(ValueError):
    """Numerically rank-zero input where a nonzero subspace is required."""


def symmetrize(M):
    """Exact symmetric part 0.5*(M + M.T).

    Floating-point addition commutes, so the result is bitwise symmetric;
    symmetric input passes through unchanged up to that identity.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    return 0.5 * (M + M.T)


def is_orthonormal(V, tol=1e-10):
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[1] == 0:
        return False
    G = V.T @ V
    return float(np.abs(G - np.eye(V.shape[1])).max()) <= tol


def _fix_signs(V):
    """Flip column signs so the first clearly-nonzero coordinate is positive."""
    V = np.array(V, dtype=float, copy=True)
    for j in range(V.shape[1]):
        col = V[:, j]
        peak = np.abs(col).max()
        if peak == 0.0:
            continue
        big = np.abs(col) > 1e-12 * peak
        lead = col[int(np.argmax(big))]
        if lead < 0:
            V[:, j] = -col
    return V


@dataclass(frozen=True, eq=False)
class ConstraintMap:
    """m sparse symmetric n x n matrices stored as upper-triangle triples.

    Flat coordinate arrays: entry ``k`` contributes ``val[k]`` at position
    ``(row[k], col[k])`` with ``row[k] <= col[k]`` of constraint matrix
    ``idx[k]`` (and mirrored below the diagonal).
    """

    n: int
    m: int
    idx: np.ndarray
    row: np.ndarray
    col: np.ndarray
    val: np.ndarray

    @classmethod
    def from_triples(cls, n, triples):
        """Build from a sequence of per-constraint ``[(i, j, v), ...]`` lists.

        Coordinates are normalized to the upper triangle; duplicate
        coordinates within one constraint are rejected.
        """
        if n < 1:
            raise DimensionError(f"matrix order must be positive, got {n}")
        triples = list(triples)
        kk, rr, cc, vv = [], [], [], []
        for k, entries in enumerate(triples):
            seen = set()
            for (i, j, v) in entries:
                i, j = int(i), int(j)
                if not (0 <= i < n and 0 <= j < n):
                    raise DimensionError(
                        f"constraint {k}: coordinate ({i},{j}) outside order-{n} matrix")
                if i > j:
                    i, j = j, i
                if (i, j) in seen:
                    raise ValueError(f"constraint {k}: duplicate coordinate ({i},{j})")
                seen.add((i, j))
                kk.append(k)
                rr.append(i)
                cc.append(j)
                vv.append(float(v))
        m = len(triples)
        if m < 1:
            raise DimensionError("constraint map needs at least one constraint")
        return cls(n=n, m=m,
                   idx=np.asarray(kk, dtype=np.intp),
                   row=np.asarray(rr, dtype=np.intp),
                   col=np.asarray(cc, dtype=np.intp),
                   val=np.asarray(vv, dtype=float))

    # -- forward map ---------------------------------------------------

    def apply(self, X):
        """Return the m-vector of inner products <A_k, X> for dense symmetric X."""
        X = np.asarray(X, dtype=float)
        if X.shape != (self.n, self.n):
            raise DimensionError(f"expected X of shape {(self.n, self.n)}, got {X.shape}")
        # off-diagonal stored entries count twice by symmetry
        coeff = np.where(self.row == self.col, 1.0, 2.0) * self.val
        return np.bincount(self.idx, weights=coeff * X[self.row, self.col],
                           minlength=self.m)

    def apply_factored(self, V, S):
        """<A_k, V S V^T> for all k without forming the n x n product."""
        return np.tensordot(self.congruence(V), np.asarray(S, dtype=float),
                            axes=([1, 2], [0, 1]))

    # -- adjoint -------------------------------------------------------

    def adjoint(self, y):
        """Dense symmetric sum_k y_k A_k."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.m,):
            raise DimensionError(f"expected y of shape {(self.m,)}, got {y.shape}")
        upper = np.zeros((self.n, self.n))
        np.add.at(upper, (self.row, self.col), y[self.idx] * self.val)
        return upper + np.triu(upper, 1).T

    def slack(self, C, y):
        """C - sum_k y_k A_k, the dual slack matrix."""
        C = np.asarray(C, dtype=float)
        if C.shape != (self.n, self.n):
            raise DimensionError(f"expected C of shape {(self.n, self.n)}, got {C.shape}")
        return C - self.adjoint(y)

    # -- compression ---------------------------------------------------

    def congruence(self, V):
        """Stack of compressed constraints V^T A_k V, shape (m, p, p).

        Cost scales with nnz * p^2, never with n^2.
        """
        V = np.asarray(V, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        if V.shape[0] != self.n:
            raise DimensionError(f"expected basis with {self.n} rows, got {V.shape[0]}")
        p = V.shape[1]
        Vr = V[self.row]
        Vc = V[self.col]
        outer = Vr[:, :, None] * Vc[:, None, :]
        sym = outer + outer.transpose(0, 2, 1)
        diag = (self.row == self.col)[:, None, None]
        contrib = np.where(diag, 0.5 * sym, sym) * self.val[:, None, None]
        T = np.zeros((self.m, p, p))
        np.add.at(T, self.idx, contrib)
        return T

    # -- Gram matrix ---------------------------------------------------

    def gram(self):
        """Sparse m x m Gram matrix G_ij = <A_i, A_j>."""
        # vectorize each constraint over the upper triangle, off-diagonal
        # entries scaled by sqrt(2) so Euclidean inner products match the
        # symmetric trace inner product
        scale = np.where(self.row == self.col, 1.0, np.sqrt(2.0)) * self.val
        flat = self.row * self.n + self.col
        B = scipy.sparse.csr_matrix((scale, (self.idx, flat)),
                                    shape=(self.m, self.n * self.n))
        return (B @ B.T).tocsr()


def top_eigs(M, r):
    """Top ``r`` eigenpairs of a dense symmetric matrix, descending.

    Returns ``(vals, vecs)`` with ``vals[0] >= vals[1] >= ...`` and
    orthonormal columns in ``vecs``.  Each eigenvector is sign-normalized
    so its first clearly-nonzero coordinate is positive.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {M.shape}")
    n = M.shape[0]
    if not (1 <= r <= n):
        raise DimensionError(f"requested {r} eigenpairs of an order-{n} matrix")
    vals, vecs = scipy.linalg.eigh(M, subset_by_index=[n - r, n - 1])
    order = np.argsort(vals)[::-1]
    return vals[order], _fix_signs(vecs[:, order])


def orthonormalize(cols, rel_tol=None):
    """Orthonormal basis for the column span, dropping rank-deficient columns.

    Raises RankError on an all-zero (or empty) input.  The returned basis
    spans the input columns up to singular values below
    ``rel_tol * sigma_max`` (default: max(shape) * machine epsilon).
    """
    A = np.asarray(cols, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.size == 0 or np.abs(A).max() == 0.0:
        raise RankError("cannot orthonormalize an all-zero set of columns")
    U, s, _ = scipy.linalg.svd(A, full_matrices=False)
    if rel_tol is None:
        rel_tol = max(A.shape) * np.finfo(float).eps
    keep = s > rel_tol * s[0]
    return _fix_signs(U[:, keep])


def opnorm_adjoint(map_, rel_tol=1e-8, max_iter=20000, seed=0):
    """Operator norm of the adjoint map, max_{|y|=1} ||sum y_k A_k||_F.

    Equals sqrt(lambda_max(G)) for the Gram matrix G_ij = <A_i, A_j>;
    computed by power iteration on G to relative tolerance ``rel_tol``.
    """
    G = map_.gram()
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(map_.m)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        v = np.ones(map_.m)
        nv = np.sqrt(map_.m)
    v /= nv
    lam = 0.0
    for _ in range(max_iter):
        w = G @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - lam) <= rel_tol * max(nw, 1e-300):
            lam = nw
            break
        lam = nw
    return float(np.sqrt(lam))
