"""Problem container, penalized dual objective, and the bundle models.

The solver works on the exact penalization of the SDP dual: for a penalty
``alpha`` at least twice the nuclear norm of some primal solution,

    F(y) = <-b, y> + alpha * max(lambda_max(A* y - C), 0)

has the same minimizers as the constrained dual.  Lower models of F are
built from a tall orthonormal basis V plus a single aggregate matrix Xbar;
the model maximizes <eta * Xbar + V S V^T, A* y - C> over eta >= 0,
S psd with  alpha * eta + tr(S) <= alpha.

Storage convention: a nonzero aggregate is kept rescaled to trace exactly
``alpha``.  The set the model maximizes over only grows under this
rescaling (total trace stays capped by alpha), so the model remains a
valid lower bound on F, and the recycled-aggregate certificates used by
the dominance and membership diagnostics become feasible for every
variant, matching the constant-trace convention the aggregate analysis
assumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linops import ConstraintMap, DimensionError, symmetrize, top_eigs
from .sketch import SketchState


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """max <-C, X> s.t. A(X) = b, X psd, in penalized dual form.

    alpha is the trace penalty; the dual objective below is exact once
    alpha >= 2 * ||X*||_nuclear for some primal solution X*.
    """

    C: np.ndarray
    A: ConstraintMap
    b: np.ndarray
    alpha: float

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if C.shape != (self.A.n, self.A.n):
            raise DimensionError(
                f"cost matrix shape {C.shape} does not match map order {self.A.n}")
        if b.shape != (self.A.m,):
            raise DimensionError(
                f"right-hand side shape {b.shape} does not match {self.A.m} constraints")
        if not np.allclose(C, C.T, atol=1e-12 * max(1.0, np.abs(C).max())):
            raise ValueError("cost matrix must be symmetric")
        if not (self.alpha > 0):
            raise ValueError(f"trace penalty must be positive, got {self.alpha}")
        object.__setattr__(self, "C", symmetrize(C))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def n(self):
        return self.A.n

    @property
    def m(self):
        return self.A.m


def dual_objective(prob, y):
    """Penalized dual objective F(y)."""
    F, _, _ = objective_with_spectrum(prob, y, 1)
    return F


def objective_with_spectrum(prob, y, k):
    """F(y) plus the top-k eigenpairs of A* y - C (shared eigensolve).

    The solver needs the same spectrum for the objective, the next bundle
    basis, and the eigengap diagnostics, so they are computed once.
    """
    M = -prob.A.slack(prob.C, y)           # A* y - C
    vals, vecs = top_eigs(M, k)
    F = -float(prob.b @ y) + prob.alpha * max(float(vals[0]), 0.0)
    return F, vals, vecs


@dataclass(frozen=True, eq=False)
class Aggregate:
    """Cached functionals of the aggregate matrix Xbar.

    AX = A(Xbar), CX = <C, Xbar>, tr = tr(Xbar).  X holds the dense matrix
    in explicit storage; sketch holds the two-sided sketch in compressed
    storage.  Either may be absent, the caches alone drive the solver.
    """

    AX: np.ndarray
    CX: float
    tr: float
    X: np.ndarray | None = None
    sketch: SketchState | None = None

    @property
    def is_zero(self):
        return self.tr == 0.0


def zero_aggregate(prob, explicit=True, sketch=None):
    X = np.zeros((prob.n, prob.n)) if explicit else None
    return Aggregate(AX=np.zeros(prob.m), CX=0.0, tr=0.0, X=X, sketch=sketch)


def model_value(prob, agg, V, y):
    """Aggregate bundle model evaluated at y, a lower bound on F(y).

    The inner maximum is linear over a compact set whose extreme points
    are 0, the stored aggregate, and alpha * v v^T for unit v in the span
    of V, giving the closed form
        <-b, y> + alpha * max(lambda_max(V^T (A*y - C) V), cbar / alpha, 0)
    with cbar = <Xbar, A* y - C> evaluated from the caches.
    """
    V = np.asarray(V, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    D = -prob.A.slack(prob.C, y)
    B = symmetrize(V.T @ D @ V)
    p = B.shape[0]
    lam = float(scipy.linalg.eigh(B, eigvals_only=True, subset_by_index=[p - 1, p - 1])[0])
    cbar = float(agg.AX @ y) - agg.CX
    return -float(prob.b @ y) + prob.alpha * max(lam, cbar / prob.alpha, 0.0)


def simple_model_value(f_cand, subgrad, agg_grad, model_cand, z, y):
    """Two-minorant cut model: pointwise max of the linearization of F at
    the candidate z (slope ``subgrad``) and the aggregate cut through the
    model value at z (slope ``agg_grad``)."""
    d = np.asarray(y, dtype=float) - np.asarray(z, dtype=float)
    return max(f_cand + float(subgrad @ d), model_cand + float(agg_grad @ d))
