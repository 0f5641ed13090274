"""Privacy-funnel curves: multi-restart AEM over a grid of disclosure thresholds."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dist import PfInstance, entropy, leakage_and_disclosure
from .errors import InputError, PrivacyFunnelError
from .solver import SolveConfig, solve

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-6
MONOTONE_SLACK = 1e-4
CSV_HEADER = ("r_target", "i_xy", "i_sy", "best_trial", "iters", "converged")


@dataclass(frozen=True)
class SweepConfig:
    num_points: int = 50
    trials: int = 30
    solver: SolveConfig = SolveConfig()
    include_endpoints: bool = True
    workers: int | None = None
    keep_traces: bool = False

    def __post_init__(self):
        if self.num_points < 2:
            raise InputError(f"num_points must be >= 2, got {self.num_points}")
        if self.trials < 1:
            raise InputError(f"trials must be >= 1, got {self.trials}")


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    i_sy: float
    i_xy: float
    iters: int
    converged: bool
    feasible: bool
    u: np.ndarray | None = field(default=None, repr=False)
    trace: list | None = field(default=None, repr=False)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.converged and self.feasible

    def rank(self):
        return (not self.ok, self.i_sy if math.isfinite(self.i_sy) else math.inf, self.trial)


@dataclass(frozen=True)
class CurvePoint:
    r_target: float
    i_xy: float
    i_sy: float
    best_trial: int
    iters: int
    converged: bool
    u: np.ndarray | None = field(default=None, repr=False, compare=False)
    trials: tuple = field(default=(), repr=False, compare=False)


def r_grid(h_x: float, num_points: int, include_endpoints: bool = True) -> np.ndarray:
    if include_endpoints:
        return np.linspace(0.0, h_x, num_points)
    return (np.arange(num_points) + 0.5) / num_points * h_x


def trial_config(base: SolveConfig, trial: int) -> SolveConfig:
    """Trial 0 starts identity-like; later trials start from seeded random mappings."""
    if trial == 0:
        return replace(base, init_mode="diag_like")
    return replace(base, init_mode="random", seed=base.seed + trial)


def run_trial(instance: PfInstance, config: SolveConfig, trial: int, keep_trace: bool = False) -> TrialOutcome:
    try:
        res = solve(instance, trial_config(config, trial), trace=keep_trace)
        i_sy, i_xy = leakage_and_disclosure(res.state.u, instance)
    except PrivacyFunnelError as exc:
        log.warning("R=%.6g trial %d failed: %s", instance.r_threshold, trial, exc)
        return TrialOutcome(trial, math.nan, math.nan, 0, False, False, error=f"{type(exc).__name__}: {exc}")
    return TrialOutcome(
        trial=trial,
        i_sy=i_sy,
        i_xy=i_xy,
        iters=res.iterations,
        converged=res.converged,
        feasible=i_xy >= instance.r_threshold - FEASIBILITY_TOL,
        u=res.state.u,
        trace=[rec.as_dict() for rec in res.trace] if keep_trace else None,
    )


def _task(args):
    return run_trial(*args)


def best_of(r_target: float, outcomes) -> CurvePoint:
    best = min(outcomes, key=TrialOutcome.rank)
    return CurvePoint(
        r_target=float(r_target),
        i_xy=best.i_xy,
        i_sy=best.i_sy,
        best_trial=best.trial,
        iters=best.iters,
        converged=best.ok,
        u=best.u,
        trials=tuple(outcomes),
    )


def sweep(instance: PfInstance, config: SweepConfig = SweepConfig(), r_values=None) -> list[CurvePoint]:
    """Best-of-``trials`` AEM solution at each threshold, in ascending R.

    ``r_values`` overrides the uniform grid over ``[0, H(X)]``.
    """
    h_x = entropy(instance.prior)
    if r_values is None:
        r_values = r_grid(h_x, config.num_points, config.include_endpoints)
    r_values = sorted(float(min(max(r, 0.0), h_x)) for r in r_values)
    tasks = [(instance.with_threshold(r), config.solver, t, config.keep_traces)
             for r in r_values for t in range(config.trials)]
    if config.workers and config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_task, tasks, chunksize=max(1, config.trials // 2)))
    else:
        outcomes = [_task(t) for t in tasks]
    points = []
    for k, r in enumerate(r_values):
        chunk = outcomes[k * config.trials:(k + 1) * config.trials]
        points.append(best_of(r, chunk))
    return points


@dataclass(frozen=True)
class MonotonicityReport:
    violations: list
    max_violation: float

    @property
    def ok(self) -> bool:
        return not self.violations


def curve_is_monotone(points, slack: float = MONOTONE_SLACK) -> MonotonicityReport:
    """Flag adjacent points whose leakage drops by more than ``slack`` as R grows."""
    if len(points) < 2:
        raise InputError("need at least two curve points")
    pts = sorted(points, key=lambda pt: pt.r_target)
    violations, worst = [], 0.0
    for a, b in zip(pts, pts[1:]):
        drop = a.i_sy - b.i_sy
        worst = max(worst, drop)
        if drop > slack:
            violations.append((a.r_target, b.r_target, drop))
    return MonotonicityReport(violations, worst)


def _fmt(x) -> str:
    return f"{x:.12g}"


def curve_csv(points) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for pt in points:
        writer.writerow([_fmt(pt.r_target), _fmt(pt.i_xy), _fmt(pt.i_sy), pt.best_trial, pt.iters,
                         "true" if pt.converged else "false"])
    return buf.getvalue()


def read_curve_csv(text: str) -> list[CurvePoint]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [CurvePoint(float(r["r_target"]), float(r["i_xy"]), float(r["i_sy"]), int(r["best_trial"]),
                       int(r["iters"]), r["converged"] == "true") for r in rows]


def curve_json(points) -> str:
    """Per-trial detail, including traces when they were kept."""
    doc = []
    for pt in points:
        doc.append({
            "r_target": pt.r_target,
            "i_xy": pt.i_xy,
            "i_sy": pt.i_sy,
            "best_trial": pt.best_trial,
            "iters": pt.iters,
            "converged": pt.converged,
            "trials": [
                {"trial": t.trial, "i_sy": t.i_sy, "i_xy": t.i_xy, "iters": t.iters, "converged": t.converged,
                 "feasible": t.feasible, "error": t.error, "trace": t.trace}
                for t in pt.trials
            ],
        })
    return json.dumps(doc, indent=1)
