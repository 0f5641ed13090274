"""Request/response handlers shared by the HTTP app and the in-process CLI path."""
from __future__ import annotations

import math

from ..dist import PfInstance, entropy, leakage_and_disclosure, mutual_information_sx, validate
from ..oracle import GridSpec, grid_search
from ..solver import SolveConfig, kkt_residuals, solve
from ..sweep import FEASIBILITY_TOL, SweepConfig, curve_is_monotone, sweep
from .schemas import (
    CurvePointModel,
    Distribution,
    KKTModel,
    OracleRequest,
    OracleResponse,
    SolveRequest,
    SolveResponse,
    SolverOptions,
    SweepRequest,
    SweepResponse,
    TraceRow,
    TrialModel,
    ValidateResponse,
)


def _num(x):
    """JSON-safe float: NaN and infinities become ``None``."""
    return float(x) if x is not None and math.isfinite(x) else None


def instance_for(dist: Distribution, n: int, r: float) -> PfInstance:
    prior, channel = validate(dist.p_x, dist.p_s_given_x)
    return PfInstance(prior, channel, n, r)


def solve_config(opts: SolverOptions) -> SolveConfig:
    return SolveConfig(**opts.model_dump())


def run_validate(dist: Distribution) -> ValidateResponse:
    prior, channel = validate(dist.p_x, dist.p_s_given_x)
    inst = PfInstance(prior, channel, 1, 0.0)
    return ValidateResponse(m=prior.m, k=channel.k, h_x=entropy(prior), i_sx=mutual_information_sx(inst))


def run_solve(req: SolveRequest) -> SolveResponse:
    inst = instance_for(req.distribution, req.N, req.R)
    res = solve(inst, solve_config(req.solver), trace=req.include_trace)
    st = res.state
    i_sy, i_xy = leakage_and_disclosure(st.u, inst)
    k = kkt_residuals(st, inst)
    trace = None
    if req.include_trace:
        trace = [TraceRow(**{key: (_num(v) if isinstance(v, float) else v) for key, v in rec.as_dict().items()})
                 for rec in res.trace]
    return SolveResponse(
        i_sy=i_sy,
        i_xy=i_xy,
        objective=st.objective,
        lam=st.lam,
        iterations=st.iter,
        converged=res.converged,
        feasible=i_xy >= req.R - FEASIBILITY_TOL,
        kkt=KKTModel(r=k.r, w=k.w, q=k.q, u_fixed_point=k.u_fixed_point, max=k.max),
        u=st.u.tolist(),
        trace=trace,
    )


def run_sweep(req: SweepRequest) -> SweepResponse:
    inst = instance_for(req.distribution, req.N, 0.0)
    cfg = SweepConfig(num_points=req.points, trials=req.trials, solver=solve_config(req.solver),
                      include_endpoints=req.include_endpoints)
    points = sweep(inst, cfg)
    mono = curve_is_monotone(points)
    out = []
    for pt in points:
        trials = None
        if req.include_trials:
            trials = [TrialModel(trial=t.trial, i_sy=_num(t.i_sy), i_xy=_num(t.i_xy), iters=t.iters,
                                 converged=t.converged, feasible=t.feasible, error=t.error)
                      for t in pt.trials]
        out.append(CurvePointModel(r_target=pt.r_target, i_xy=_num(pt.i_xy), i_sy=_num(pt.i_sy),
                                   best_trial=pt.best_trial, iters=pt.iters, converged=pt.converged,
                                   trials=trials))
    return SweepResponse(h_x=entropy(inst.prior), i_sx=mutual_information_sx(inst), points=out,
                         monotone_violations=len(mono.violations), max_violation=mono.max_violation)


def run_oracle(req: OracleRequest) -> OracleResponse:
    inst = instance_for(req.distribution, req.N, req.R)
    grid = grid_search(inst, GridSpec(req.step, req.constraint_slack))
    cfg = SweepConfig(num_points=2, trials=req.trials, solver=solve_config(req.solver))
    (best,) = sweep(inst, cfg, r_values=[req.R])
    diff = best.i_sy - grid.i_sy if math.isfinite(grid.i_sy) and math.isfinite(best.i_sy) else None
    return OracleResponse(
        grid_i_sy=_num(grid.i_sy),
        grid_i_xy=_num(grid.i_xy),
        grid_conditional=None if grid.conditional is None else grid.conditional.tolist(),
        grid_points=grid.points,
        aem_i_sy=_num(best.i_sy),
        aem_i_xy=_num(best.i_xy),
        aem_converged=best.converged,
        difference=_num(diff),
    )
