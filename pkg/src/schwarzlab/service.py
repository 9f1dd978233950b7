"""FastAPI service exposing the solver laboratory.

The CLI is a thin client of this app; it talks to it either in-process
(ASGI transport) or over the network against `schwarzlab serve`.
"""

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .errors import NumericalError, UsageError
from .experiments import (ExperimentConfig, ResultRow, emit_report, emit_spectrum,
                          run_checks, run_sweep, solve_point, spectrum_rows,
                          sweep_points, RunContext)

app = FastAPI(title="schwarzlab",
              description="Two-level additive Schwarz solver laboratory")


class SolveRequest(BaseModel):
    config: ExperimentConfig


class SweepRequest(BaseModel):
    config: ExperimentConfig
    threads: int = Field(default=1, ge=1)


class SweepResponse(BaseModel):
    rows: list[ResultRow]


class SpectrumRow(BaseModel):
    interface_id: int
    k: int
    eigenvalue: float


class SpectrumResponse(BaseModel):
    rows: list[SpectrumRow]


class CheckRequest(BaseModel):
    seed: int = 0


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class CheckResponse(BaseModel):
    passed: bool
    results: list[CheckResult]


@app.exception_handler(UsageError)
async def _usage_handler(request: Request, exc: UsageError):
    return JSONResponse(status_code=400,
                        content={"error_type": "usage", "detail": str(exc)})


@app.exception_handler(NumericalError)
async def _numerical_handler(request: Request, exc: NumericalError):
    return JSONResponse(status_code=500,
                        content={"error_type": "numerical", "detail": str(exc)})


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/solve", response_model=ResultRow)
def solve(req: SolveRequest):
    """Run the single point described by the config (first sweep point)."""
    ctx = RunContext(req.config)
    type_, m, d, c = sweep_points(req.config)[0]
    row, _, _ = solve_point(ctx, type_, m, d, c)
    return row


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest):
    rows = run_sweep(req.config, threads=req.threads)
    return SweepResponse(rows=rows)


@app.post("/spectrum", response_model=SpectrumResponse)
def spectrum(req: SolveRequest):
    rows = spectrum_rows(req.config)
    return SpectrumResponse(rows=[SpectrumRow(interface_id=t, k=k, eigenvalue=lam)
                                  for t, k, lam in rows])


@app.post("/check", response_model=CheckResponse)
def check(req: CheckRequest):
    passed, results = run_checks(seed=req.seed)
    return CheckResponse(passed=passed, results=[CheckResult(**r) for r in results])
