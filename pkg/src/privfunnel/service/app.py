from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from ..errors import InputError, PrivacyFunnelError, TooLarge, exit_code_for
from . import ops
from .schemas import (
    Distribution,
    ErrorResponse,
    OracleRequest,
    OracleResponse,
    SolveRequest,
    SolveResponse,
    SweepRequest,
    SweepResponse,
    ValidateResponse,
)

app = FastAPI(title="privfunnel", version="0.1.0")


@app.exception_handler(PrivacyFunnelError)
async def _domain_error(request: Request, exc: PrivacyFunnelError):
    if isinstance(exc, InputError):
        status = 422
    elif isinstance(exc, TooLarge):
        status = 413
    else:
        status = 500
    body = ErrorResponse(error=type(exc).__name__, detail=str(exc), exit_code=exit_code_for(exc))
    return JSONResponse(status_code=status, content=body.model_dump())


@app.get("/health")
def health():
    return {"status": "ok"}


# Plain ``def`` handlers: FastAPI runs them in its threadpool, so a long sweep
# does not block other clients.
@app.post("/validate", response_model=ValidateResponse)
def validate(dist: Distribution):
    return ops.run_validate(dist)


@app.post("/solve", response_model=SolveResponse)
def solve(req: SolveRequest):
    return ops.run_solve(req)


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest):
    return ops.run_sweep(req)


@app.post("/oracle", response_model=OracleResponse)
def oracle(req: OracleRequest):
    return ops.run_oracle(req)
