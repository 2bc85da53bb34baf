"""Persisted run artifacts: per-iteration CSV trace and JSON summary.

The trace carries one row per iteration with fixed columns

    t, F_y, F_z, Fbar_z, descent, feas, lammin, pval, dval, step,
    gap1..gapN, inner_res

where N is the configured bundle size.  Floats are written with 17
significant digits so a parsed trace reproduces the run bitwise.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from ..bundle import IterationRecord


class TraceFormatError(ValueError):
    """Trace file does not match the expected column layout."""


def _fmt(x):
    return format(float(x), ".17g")


def trace_header(rbar):
    gaps = [f"gap{r}" for r in range(1, rbar + 1)]
    return ["t", "F_y", "F_z", "Fbar_z", "descent", "feas", "lammin",
            "pval", "dval", "step", *gaps, "inner_res"]


def write_trace(path, records, rbar):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trace_header(rbar))
        for rec in records:
            if len(rec.gaps) != rbar:
                raise TraceFormatError(
                    f"record {rec.t} carries {len(rec.gaps)} gaps, header promises {rbar}")
            w.writerow([rec.t, _fmt(rec.F_y), _fmt(rec.F_z), _fmt(rec.Fbar_z),
                        int(rec.descent), _fmt(rec.feas), _fmt(rec.lammin),
                        _fmt(rec.pval), _fmt(rec.dval), _fmt(rec.step),
                        *[_fmt(g) for g in rec.gaps], _fmt(rec.inner_res)])


def read_trace(path):
    """Parse a trace back into records; returns (records, rbar)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise TraceFormatError(f"{path}: empty trace")
    header = rows[0]
    base = ["t", "F_y", "F_z", "Fbar_z", "descent", "feas", "lammin",
            "pval", "dval", "step"]
    if header[:10] != base or header[-1:] != ["inner_res"]:
        raise TraceFormatError(f"{path}: unexpected header {header!r}")
    ngap = len(header) - 11
    if [h for h in header[10:-1]] != [f"gap{r}" for r in range(1, ngap + 1)]:
        raise TraceFormatError(f"{path}: unexpected gap columns in {header!r}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise TraceFormatError(
                f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            records.append(IterationRecord(
                t=int(row[0]), F_y=float(row[1]), F_z=float(row[2]),
                Fbar_z=float(row[3]), descent=bool(int(row[4])),
                feas=float(row[5]), lammin=float(row[6]), pval=float(row[7]),
                dval=float(row[8]), step=float(row[9]),
                gaps=tuple(float(g) for g in row[10:10 + ngap]),
                inner_res=float(row[10 + ngap])))
        except ValueError as exc:
            raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
    return records, ngap


def summary_dict(cfg, result, refs=None, metrics=None, problem_label="",
                 alpha_effective=None):
    """JSON-ready summary of a run: config echo, stopping data, telemetry."""
    inv = result.stats.invariants
    return {
        "problem": problem_label,
        "alpha_effective": alpha_effective,
        "config": {
            "variant": cfg.variant, "beta": cfg.beta, "rho": cfg.rho,
            "rbar": cfg.rbar, "hr_keep": cfg.resolved_hr_keep(),
            "alpha": cfg.alpha, "max_iters": cfg.max_iters,
            "inner_tol": cfg.inner_tol, "inner_max_iter": cfg.inner_max_iter,
            "storage": cfg.storage, "sketch_rank": cfg.sketch_rank,
            "target_gap": cfg.target_gap, "seed": cfg.seed,
            "check_invariants": cfg.check_invariants,
        },
        "seed": cfg.seed,
        "iterations": result.stats.iterations,
        "descent_steps": result.stats.descent_steps,
        "stop_reason": result.stats.stop_reason,
        "max_norm_y": result.stats.max_norm_y,
        "final_objective": result.state.F_y,
        "warnings": list(result.stats.warnings),
        "invariants": inv.as_dict() if inv is not None else None,
        "refs": refs.to_dict() if refs is not None else None,
        "metrics": metrics.to_dict() if metrics is not None else None,
    }


def write_summary(path, summary):
    with open(path, "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_summary(path):
    with open(path) as fh:
        return json.load(fh)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
