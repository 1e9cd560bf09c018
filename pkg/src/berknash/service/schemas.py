"""Pydantic request/response models for the HTTP service."""
from __future__ import annotations

from pydantic import BaseModel, Field


class ActionSpec(BaseModel):
    name: str
    cost: float


class BeliefSpec(BaseModel):
    name: str | None = None
    dists: list[list[float]]


class InstancePayload(BaseModel):
    actions: list[ActionSpec]
    rewards: list[float]
    true_dists: list[list[float]]
    beliefs: list[BeliefSpec]
    prior: list[float] | None = None

    def to_raw(self) -> dict:
        raw = {
            "actions": [a.model_dump() for a in self.actions],
            "rewards": self.rewards,
            "true_dists": self.true_dists,
            "beliefs": [
                {k: v for k, v in b.model_dump().items() if v is not None}
                for b in self.beliefs
            ],
        }
        if self.prior is not None:
            raw["prior"] = self.prior
        return raw


class ValidateRequest(BaseModel):
    instance: InstancePayload


class KLRequest(BaseModel):
    instance: InstancePayload


class BreakPointsRequest(BaseModel):
    instance: InstancePayload
    contract: list[float] | None = None


class EquilibriaRequest(BaseModel):
    instance: InstancePayload
    contract: list[float]
    grid_n: int = Field(default=10_000, ge=1)
    epsilon: float = Field(default=1e-6, ge=0.0)


class SolveRequest(BaseModel):
    instance: InstancePayload
    epsilon: float | None = None
    max_workers: int | None = None


class SimulateRequest(BaseModel):
    instance: InstancePayload
    contract: list[float]
    horizon: int = Field(ge=1)
    seed: int


class UnhappyScenarioRequest(BaseModel):
    p: float
    c: float
    delta: float
    correct: bool = False


class ReduceRequest(BaseModel):
    y: list[list[float]]
    z: list[list[float]]
    eps_prime: float = Field(gt=0.0)


class ValidateResponse(BaseModel):
    instance: dict
    n_actions: int
    n_rewards: int
    n_beliefs: int
    misspecification_level: float | None


class KLResponse(BaseModel):
    profiles: list[dict]
    misspecification_level: float | None


class BreakPointsResponse(BaseModel):
    break_points: list[float]
    region_actions: list[int]
    reliable: bool
    warnings: list[str]


class EquilibriaResponse(BaseModel):
    certificates: list[dict]
    count: int


class SolveResponse(BaseModel):
    report: dict


class SimulateResponse(BaseModel):
    seed: int
    horizon: int
    rng_algorithm: str
    final_freq: list[float]
    switch_times: list[int]
    cycle_stats: list[dict] | None
    certificate: dict | None


class ScenarioResponse(BaseModel):
    instance: dict
    contract: list[float] | None = None
    bounds: dict | None = None


class ReduceResponse(BaseModel):
    reduction: dict
    verification: dict
