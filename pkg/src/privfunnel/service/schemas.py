from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class Distribution(BaseModel):
    p_x: list[float]
    p_s_given_x: list[list[float]]


class SolverOptions(BaseModel):
    max_iter: int = Field(500, ge=1)
    obj_tol: float = Field(1e-10, gt=0)
    newton_tol: float = Field(1e-10, gt=0)
    newton_max: int = Field(50, ge=1)
    init_mode: Literal["diag_like", "random"] = "diag_like"
    smoothing_eps: float = Field(1e-9, gt=0)
    seed: int = 0


class ValidateResponse(BaseModel):
    m: int
    k: int
    h_x: float
    i_sx: float


class SolveRequest(BaseModel):
    distribution: Distribution
    R: float
    N: int = Field(ge=1)
    solver: SolverOptions = SolverOptions()
    include_trace: bool = False


class TraceRow(BaseModel):
    iter: int
    objective: float
    i_sy: float
    i_xy: float
    lam: float
    kl_q: Optional[float]
    kl_u: Optional[float]
    kl_r: Optional[float]
    kl_w: Optional[float]
    slack: Optional[float]
    realized_drop: float
    saturated: bool


class KKTModel(BaseModel):
    r: float
    w: float
    q: float
    u_fixed_point: float
    max: float


class SolveResponse(BaseModel):
    i_sy: float
    i_xy: float
    objective: float
    lam: float
    iterations: int
    converged: bool
    feasible: bool
    kkt: KKTModel
    u: list[list[float]]
    trace: Optional[list[TraceRow]] = None


class SweepRequest(BaseModel):
    distribution: Distribution
    N: int = Field(ge=1)
    points: int = Field(50, ge=2)
    trials: int = Field(30, ge=1)
    include_endpoints: bool = True
    solver: SolverOptions = SolverOptions()
    include_trials: bool = False


class TrialModel(BaseModel):
    trial: int
    i_sy: Optional[float]
    i_xy: Optional[float]
    iters: int
    converged: bool
    feasible: bool
    error: Optional[str] = None


class CurvePointModel(BaseModel):
    r_target: float
    i_xy: Optional[float]
    i_sy: Optional[float]
    best_trial: int
    iters: int
    converged: bool
    trials: Optional[list[TrialModel]] = None


class SweepResponse(BaseModel):
    h_x: float
    i_sx: float
    points: list[CurvePointModel]
    monotone_violations: int
    max_violation: float


class OracleRequest(BaseModel):
    distribution: Distribution
    R: float
    N: int = Field(ge=1)
    step: float = Field(0.005, gt=0, le=0.5)
    constraint_slack: float = Field(0.0, ge=0)
    trials: int = Field(10, ge=1)
    solver: SolverOptions = SolverOptions()


class OracleResponse(BaseModel):
    grid_i_sy: Optional[float]
    grid_i_xy: Optional[float]
    grid_conditional: Optional[list[list[float]]]
    grid_points: int
    aem_i_sy: Optional[float]
    aem_i_xy: Optional[float]
    aem_converged: bool
    difference: Optional[float]


class ErrorResponse(BaseModel):
    error: str
    detail: str
    exit_code: int
