"""FastAPI application exposing the solver as a stateless compute service."""
from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from . import handlers, schemas

app = FastAPI(
    title="berknash",
    description="Berk-Nash equilibria and optimal contracts for misspecified agents",
    version=__version__,
)


def _domain(call, *args, **kwargs):
    try:
        return call(*args, **kwargs)
    except handlers.DOMAIN_ERRORS as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/")
def root() -> dict:
    return {"service": "berknash", "version": __version__}


@app.post("/validate", response_model=schemas.ValidateResponse)
def validate(req: schemas.ValidateRequest):
    return _domain(handlers.handle_validate, req.instance.to_raw())


@app.post("/kl", response_model=schemas.KLResponse)
def kl(req: schemas.KLRequest):
    return _domain(handlers.handle_kl, req.instance.to_raw())


@app.post("/breakpoints", response_model=schemas.BreakPointsResponse)
def breakpoints(req: schemas.BreakPointsRequest):
    return _domain(handlers.handle_breakpoints, req.instance.to_raw(), req.contract)


@app.post("/equilibria", response_model=schemas.EquilibriaResponse)
def equilibria(req: schemas.EquilibriaRequest):
    return _domain(
        handlers.handle_equilibria,
        req.instance.to_raw(),
        req.contract,
        req.grid_n,
        req.epsilon,
    )


@app.post("/solve", response_model=schemas.SolveResponse)
def solve(req: schemas.SolveRequest):
    return _domain(
        handlers.handle_solve, req.instance.to_raw(), req.epsilon, req.max_workers
    )


@app.post("/simulate", response_model=schemas.SimulateResponse)
def simulate(req: schemas.SimulateRequest):
    return _domain(
        handlers.handle_simulate, req.instance.to_raw(), req.contract, req.horizon, req.seed
    )


@app.post("/scenario/unhappy", response_model=schemas.ScenarioResponse)
def scenario_unhappy(req: schemas.UnhappyScenarioRequest):
    return _domain(handlers.handle_scenario_unhappy, req.p, req.c, req.delta, req.correct)


@app.post("/scenario/divergence", response_model=schemas.ScenarioResponse)
def scenario_divergence():
    return _domain(handlers.handle_scenario_divergence)


@app.post("/reduce", response_model=schemas.ReduceResponse)
def reduce(req: schemas.ReduceRequest):
    return _domain(handlers.handle_reduce, req.y, req.z, req.eps_prime)
