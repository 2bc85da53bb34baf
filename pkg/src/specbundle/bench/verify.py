"""Runtime verification of the solver's structural guarantees.

Checked from a finished trace plus reference values:

* primal feasibility bound: at every descent step,
  ||b - A(X)||^2 <= (2 rho / beta) (F(y) - F*);
* dual feasibility bound: lambda_min(C - A* y') >= -(F(y) - F*) / D for
  the updated reference point, D the reference solution's nuclear norm
  (valid once alpha >= 2 D);
* primal-dual gap bracket:
  -( (1-beta)/beta ) (F(y) - F*) - sqrt((2 rho / beta)(F(y) - F*)) D_y
     <= <b, y'> - <C, X>
     <= (alpha / D)(F(y) - F*) + sqrt((2 rho / beta)(F(y) - F*)) D_y,
  with D_y the largest reference-point norm along the run;
* model dominance and recycled-cut membership slacks, recorded live by
  the solver (they need model state a trace does not retain);
* spectral model accuracy: for X with eigengap delta at cut r and any
  symmetric Y within Frobenius distance delta,
  0 <= max(lam_1(Y), 0) - max(lam_1(V^T Y V), 0)
    <= 8 ||Y-X||_F^2 Lam / delta^2 + (8 sqrt(2) + 16) ||Y-X||_F^2 / delta,
  where V spans the top-r eigenvectors of X and Lam bounds the residual
  spectrum; globally the difference is at most 2 ||X-Y||_op.

All inequalities are checked with slack tolerance ``tol * scale`` where
scale grows with the magnitudes involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ..linops import symmetrize, top_eigs


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float        # most adverse normalized slack seen (<= 0 is clean)
    count: int
    note: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.note})" if self.note else ""
        return f"{status} {self.name}: worst slack {self.worst:.3e} over {self.count} checks{extra}"


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        return [c.line() for c in self.checks]


def _relslack(lhs, rhs):
    """Normalized violation of lhs <= rhs."""
    return (lhs - rhs) / (1.0 + abs(lhs) + abs(rhs))


def check_descent_bounds(records, refs, rho, beta, alpha, d_y, tol=1e-6):
    """The three per-descent-step bounds, from trace rows and references."""
    f_star = refs.d_star
    D = refs.nuc
    out = []
    worst = {"primal feasibility bound": (-np.inf, 0),
             "dual feasibility bound": (-np.inf, 0),
             "gap upper bound": (-np.inf, 0),
             "gap lower bound": (-np.inf, 0)}
    for rec in records:
        if not rec.descent:
            continue
        drop = max(rec.F_y - f_star, 0.0)
        budget = np.sqrt(2.0 * rho / beta * drop)
        w, c = worst["primal feasibility bound"]
        worst["primal feasibility bound"] = (
            max(w, _relslack(rec.feas ** 2, 2.0 * rho / beta * drop)), c + 1)
        w, c = worst["dual feasibility bound"]
        worst["dual feasibility bound"] = (
            max(w, _relslack(-drop / D - rec.lammin, 0.0)), c + 1)
        gap = rec.dval - rec.pval
        w, c = worst["gap upper bound"]
        worst["gap upper bound"] = (
            max(w, _relslack(gap, alpha / D * drop + budget * d_y)), c + 1)
        w, c = worst["gap lower bound"]
        worst["gap lower bound"] = (
            max(w, _relslack(-(1.0 - beta) / beta * drop - budget * d_y, gap)), c + 1)
    note = "" if alpha >= 2.0 * D - 1e-9 else "penalty below twice the solution nuclear norm"
    for name, (w, c) in worst.items():
        if c == 0:
            out.append(CheckResult(name, True, -np.inf, 0, "no descent steps"))
            continue
        extra = note if name == "dual feasibility bound" else ""
        out.append(CheckResult(name, bool(w <= tol), float(w), c, extra))
    return out


def check_recorded_invariants(invariants, tol_dominance=1e-7, tol_membership=1e-8):
    """Turn the solver's live dominance/membership slacks into checks."""
    out = []
    if not invariants:
        out.append(CheckResult("model dominance", False, np.inf, 0,
                               "run carried no invariant telemetry"))
        return out
    checked = int(invariants.get("checked", 0))
    out.append(CheckResult(
        "model dominance (two-cut vs aggregate)",
        bool(invariants["simple_minus_model"] <= 1e-8), float(invariants["simple_minus_model"]),
        checked))
    out.append(CheckResult(
        "model dominance (aggregate vs objective)",
        bool(invariants["model_minus_f"] <= tol_dominance), float(invariants["model_minus_f"]),
        checked))
    out.append(CheckResult(
        "recycled-cut membership (reconstruction)",
        bool(invariants["membership_err"] <= tol_membership), float(invariants["membership_err"]),
        checked))
    out.append(CheckResult(
        "recycled-cut membership (feasibility)",
        bool(invariants["membership_feas"] <= tol_membership), float(invariants["membership_feas"]),
        checked))
    return out


# ---------------------------------------------------------------------------
# spectral model accuracy property
# ---------------------------------------------------------------------------

def spectral_truncation_gap(X, Y, r):
    """max(lam_1(Y), 0) minus its maximization restricted to the top-r
    eigenspace of X; the quantity the accuracy bound controls."""
    _, V = top_eigs(np.asarray(X, dtype=float), r)
    full = max(float(np.linalg.eigvalsh(Y).max()), 0.0)
    B = symmetrize(V.T @ Y @ V)
    compressed = max(float(np.linalg.eigvalsh(B).max()), 0.0)
    return full - compressed


def sample_gapped_matrix(rng, n, r, delta):
    """Random symmetric X whose spectrum has the exact gap delta at cut r."""
    Q, _ = scipy.linalg.qr(rng.standard_normal((n, n)))
    vals = np.sort(rng.normal(scale=2.0, size=n))[::-1]
    # push the tail down so vals[r-1] - vals[r] == delta exactly
    tail_shift = vals[r - 1] - delta - vals[r]
    vals[r:] += tail_shift
    return symmetrize((Q * vals) @ Q.T), vals


def check_spectral_accuracy(samples=200, seed=0, n_range=(3, 16), tol=1e-9):
    """Property check of the truncation-gap bounds on random instances.

    Draws (X, Y, r, delta) with ||Y - X||_F <= delta and verifies the
    two-sided Frobenius bound plus the global operator-norm bound.
    """
    rng = np.random.default_rng(seed)
    worst_low = -np.inf
    worst_up = -np.inf
    worst_op = -np.inf
    for _ in range(samples):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        r = int(rng.integers(1, n))
        delta = float(np.exp(rng.uniform(np.log(0.05), np.log(2.0))))
        X, vals = sample_gapped_matrix(rng, n, r, delta)
        E = symmetrize(rng.standard_normal((n, n)))
        E *= rng.uniform(0.05, 1.0) * delta / np.linalg.norm(E, "fro")
        Y = X + E
        dist2 = float(np.linalg.norm(Y - X, "fro")) ** 2
        lam_resid = max(abs(vals[r]), abs(vals[-1]))
        bound = 8.0 * dist2 * lam_resid / delta ** 2 + (8.0 * np.sqrt(2.0) + 16.0) * dist2 / delta
        gap = spectral_truncation_gap(X, Y, r)
        worst_low = max(worst_low, -gap)
        worst_up = max(worst_up, gap - bound)
        op = 2.0 * float(np.linalg.norm(Y - X, 2))
        worst_op = max(worst_op, abs(gap) - op)
    out = [
        CheckResult("spectral accuracy (nonnegativity)", bool(worst_low <= tol),
                    float(worst_low), samples),
        CheckResult("spectral accuracy (gap bound)", bool(worst_up <= tol),
                    float(worst_up), samples),
        CheckResult("spectral accuracy (operator bound)", bool(worst_op <= tol),
                    float(worst_op), samples),
    ]
    return out


def verify_run(records, refs, rho, beta, alpha, d_y, invariants=None,
               samples=200, seed=0, tol=1e-6):
    """Full verification of a finished run; see module docstring."""
    rep = VerifyReport()
    rep.checks += check_descent_bounds(records, refs, rho, beta, alpha, d_y, tol=tol)
    rep.checks += check_recorded_invariants(invariants)
    rep.checks += check_spectral_accuracy(samples=samples, seed=seed)
    return rep
