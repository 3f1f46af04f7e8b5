"""Request and response schemas of the HTTP service.

The CLI uses the same models, so command-line runs and remote runs exchange
identical documents.  Every response carries ``schema_version`` and echoes
the fully resolved configuration, including derived quantities.
"""

from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = 1


class ProblemFields(BaseModel):
    """Problem-size inputs: exactly one of gamma, theta, or p0."""

    model_config = ConfigDict(extra="forbid")

    gamma: float | None = Field(default=None, gt=0)
    theta: float | None = Field(default=None, gt=0)
    p0: float | None = Field(default=None, gt=0, le=1)
    phi: float = Field(default=math.pi, gt=0, le=math.pi)
    phi_tau: float = Field(default=math.pi, gt=0, le=math.pi)


class AnalyzeRequest(ProblemFields):
    L: int = Field(ge=1)
    n_d: int = Field(ge=1)


class PlanConfig(BaseModel):
    """Resolved problem and plan, echoed in responses."""

    p0: float
    phi: float
    phi_tau: float
    theta: float
    xi: float
    n_c: int
    phase_matched: bool
    gamma: float | None
    L: int
    n_d: int
    step_power: int
    alpha: float
    beta: float


class AnalyzeResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    config: PlanConfig
    lhs_bits: float
    rhs_bits: float
    d_value: float
    violated: bool


class MonteCarloRequest(ProblemFields):
    L: int | None = Field(default=None, ge=1)
    n_d: int | None = Field(default=None, ge=1)
    shots: int = Field(default=10_000, ge=1)
    trials: int = Field(default=1_000, ge=1)
    seed: int | None = None


class SamplingConfig(PlanConfig):
    shots: int
    trials: int
    seed: int


class MonteCarloResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    config: SamplingConfig
    d_mean: float
    d_std: float
    d_stderr: float
    theory_d: float
    per_trial_d: list[float]


class LandscapeRequest(ProblemFields):
    resolution: int = Field(default=25, ge=2)
    mode: Literal["exact", "sampled"] = "exact"
    shots: int = Field(default=10_000, ge=1)
    trials: int = Field(default=20, ge=1)
    seed: int | None = None
    include_slices: bool = True


class LandscapeCellModel(BaseModel):
    beta: float
    alpha: float
    L: int
    n_d: int
    d: float
    d_std: float | None = None


class LandscapeConfig(BaseModel):
    p0: float
    phi: float
    phi_tau: float
    theta: float
    n_c: int
    gamma: float | None
    resolution: int
    mode: str
    shots: int
    trials: int
    seed: int


class LandscapeResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    config: LandscapeConfig
    cells: list[LandscapeCellModel]
    slices: dict[str, list[LandscapeCellModel]]


class SenmCheckRequest(ProblemFields):
    """One of three modes: inline ensemble document, random specs, or the
    quantum-imitation fit."""

    ensemble: dict | None = None
    steps: int | None = Field(default=None, ge=1)
    random_specs: int | None = Field(default=None, ge=1)
    seed: int | None = None
    imitate: bool = False
    L: int | None = Field(default=None, ge=1)
    n_d: int | None = Field(default=None, ge=1)


class SenmSpecReport(BaseModel):
    index: int
    steps: int
    lhs_bits: float
    rhs_bits: float
    d_value: float
    violated: bool


class ImitationReport(BaseModel):
    plan: PlanConfig
    residual: float
    end_gap: float
    classical_d: float
    quantum_d: float
    classical_end_to_end: list[list[float]]
    quantum_end_to_end: list[list[float]]


class SenmCheckResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    mode: Literal["ensemble", "random", "imitate"]
    num_specs: int
    min_d: float | None
    seed: int | None
    reports: list[SenmSpecReport]
    imitation: ImitationReport | None = None
