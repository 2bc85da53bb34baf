"""Accuracy metrics of a solver run against reference optima."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class MetricsReport:
    """Relative accuracy of the final dual point and primal candidate.

    dual_opt:    (F(y) - d*) / |d*|, nonnegative up to reference error.
    primal_opt:  |<C, X> - p*| / |p*|.
    primal_feas: ||A(X) - b|| / ||b||.
    """

    dual_opt: float
    primal_opt: float
    primal_feas: float
    d_star: float
    p_star: float
    provenance: str

    def to_dict(self):
        return asdict(self)


def compute_metrics(F_y, primal_value, feas_norm, b_norm, refs):
    """Assemble the report from final-run scalars and reference values.

    ``primal_value`` is <C, X> for the final primal candidate and
    ``feas_norm`` its constraint residual norm.  Denominators fall back
    to 1 when a reference value or ||b|| is zero.
    """
    dd = abs(refs.d_star) if refs.d_star != 0.0 else 1.0
    pp = abs(refs.p_star) if refs.p_star != 0.0 else 1.0
    bb = b_norm if b_norm > 0.0 else 1.0
    return MetricsReport(
        dual_opt=(float(F_y) - refs.d_star) / dd,
        primal_opt=abs(float(primal_value) - refs.p_star) / pp,
        primal_feas=float(feas_norm) / bb,
        d_star=refs.d_star,
        p_star=refs.p_star,
        provenance=refs.provenance,
    )


def metrics_from_run(result, refs, b_norm):
    """Metrics of the last iteration of a run (matching the trace tail)."""
    rec = result.records[-1]
    return compute_metrics(result.state.F_y, rec.pval, rec.feas, b_norm, refs)
