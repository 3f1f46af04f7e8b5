"""Request handlers shared by the HTTP app and the in-process CLI client."""

from __future__ import annotations

import os

import numpy as np

from ..entropy import (
    VIOLATION_TOL,
    ExperimentPlan,
    closed_form_d,
    evaluate_inequality,
    h,
    max_violation_plan,
    plan_for,
)
from ..errors import ConfigError
from ..montecarlo import McConfig, estimate_d, landscape_scan
from ..qaa import QaaParams, step_conditional_probs
from ..senm import (
    conditional_readouts,
    fit_imitation,
    grand_joint,
    load_ensemble,
    random_ensemble,
)
from .models import (
    AnalyzeRequest,
    AnalyzeResponse,
    ImitationReport,
    LandscapeCellModel,
    LandscapeConfig,
    LandscapeRequest,
    LandscapeResponse,
    MonteCarloRequest,
    MonteCarloResponse,
    PlanConfig,
    ProblemFields,
    SamplingConfig,
    SenmCheckRequest,
    SenmCheckResponse,
    SenmSpecReport,
)


def resolve_params(fields: ProblemFields) -> tuple[QaaParams, float | None]:
    """Build problem parameters from exactly one of gamma, theta, p0."""
    given = [
        name
        for name in ("gamma", "theta", "p0")
        if getattr(fields, name) is not None
    ]
    if len(given) != 1:
        raise ConfigError(
            f"exactly one of gamma, theta, p0 must be given (got {given or 'none'})"
        )
    if fields.gamma is not None:
        params = QaaParams.from_gamma(fields.gamma, phi=fields.phi, phi_tau=fields.phi_tau)
        return params, fields.gamma
    if fields.theta is not None:
        params = QaaParams.from_theta(fields.theta, phi=fields.phi, phi_tau=fields.phi_tau)
    else:
        params = QaaParams.from_problem(fields.p0, phi=fields.phi, phi_tau=fields.phi_tau)
    return params, None


def plan_config(params: QaaParams, plan: ExperimentPlan) -> PlanConfig:
    return PlanConfig(
        p0=params.p0,
        phi=params.phi,
        phi_tau=params.phi_tau,
        theta=params.theta,
        xi=params.xi,
        n_c=params.n_c,
        phase_matched=params.phase_matched,
        gamma=plan.gamma,
        L=plan.L,
        n_d=plan.n_d,
        step_power=plan.step_power,
        alpha=plan.alpha,
        beta=plan.beta,
    )


def fresh_seed() -> int:
    return int.from_bytes(os.urandom(8), "big") >> 1


def run_analyze(req: AnalyzeRequest) -> AnalyzeResponse:
    """Exact closed-form inequality evaluation for one plan."""
    params, gamma = resolve_params(req)
    plan = plan_for(params, req.L, req.n_d, gamma=gamma)
    lhs = float(h(plan.n_d * params.theta))
    rhs = plan.L * float(h(plan.step_power * params.theta))
    d = rhs - lhs
    return AnalyzeResponse(
        config=plan_config(params, plan),
        lhs_bits=lhs,
        rhs_bits=rhs,
        d_value=d,
        violated=d < -VIOLATION_TOL,
    )


def run_montecarlo(req: MonteCarloRequest) -> MonteCarloResponse:
    params, gamma = resolve_params(req)
    plan = _plan_or_max(params, gamma, req.L, req.n_d)
    seed = req.seed if req.seed is not None else fresh_seed()
    result = estimate_d(
        McConfig(params=params, plan=plan, shots=req.shots, trials=req.trials, seed=seed)
    )
    base = plan_config(params, plan).model_dump()
    return MonteCarloResponse(
        config=SamplingConfig(**base, shots=req.shots, trials=req.trials, seed=seed),
        d_mean=result.d_mean,
        d_std=result.d_std,
        d_stderr=result.d_stderr,
        theory_d=result.theory_d,
        per_trial_d=list(result.per_trial_d),
    )


def _plan_or_max(
    params: QaaParams, gamma: float | None, L: int | None, n_d: int | None
) -> ExperimentPlan:
    if L is None and n_d is None:
        return max_violation_plan(params, gamma=gamma)
    if L is None or n_d is None:
        # Allow giving only L; a bare n_d has no natural step split.
        if L is not None:
            return plan_for(params, L, n_d if n_d is not None else L, gamma=gamma)
        raise ConfigError("n_d given without L; specify both or neither")
    return plan_for(params, L, n_d, gamma=gamma)


def run_landscape(req: LandscapeRequest) -> LandscapeResponse:
    params, gamma = resolve_params(req)
    seed = req.seed if req.seed is not None else fresh_seed()
    result = landscape_scan(
        params,
        resolution=req.resolution,
        mode=req.mode,
        shots=req.shots,
        trials=req.trials,
        seed=seed,
        include_slices=req.include_slices,
        gamma=gamma,
    )

    def cell(c) -> LandscapeCellModel:
        return LandscapeCellModel(
            beta=c.beta, alpha=c.alpha, L=c.L, n_d=c.n_d, d=c.d, d_std=c.d_std
        )

    return LandscapeResponse(
        config=LandscapeConfig(
            p0=params.p0,
            phi=params.phi,
            phi_tau=params.phi_tau,
            theta=params.theta,
            n_c=params.n_c,
            gamma=gamma,
            resolution=req.resolution,
            mode=req.mode,
            shots=req.shots,
            trials=req.trials,
            seed=seed,
        ),
        cells=[cell(c) for c in result.cells],
        slices={str(L): [cell(c) for c in rows] for L, rows in result.slices.items()},
    )


def run_senm_check(req: SenmCheckRequest) -> SenmCheckResponse:
    modes = [
        name
        for name, active in (
            ("ensemble", req.ensemble is not None),
            ("random", req.random_specs is not None),
            ("imitate", req.imitate),
        )
        if active
    ]
    if len(modes) != 1:
        raise ConfigError(
            "choose exactly one of: an ensemble document, random_specs, imitate"
        )
    mode = modes[0]
    if mode == "ensemble":
        return _check_ensemble(req)
    if mode == "random":
        return _check_random(req)
    return _check_imitation(req)


def _spec_report(index: int, spec, kernel, steps: int) -> SenmSpecReport:
    stats = conditional_readouts(grand_joint(spec, kernel, steps))
    plan = ExperimentPlan.from_counts(n_c=steps, L=steps, n_d=steps)
    report = evaluate_inequality(stats, plan)
    return SenmSpecReport(
        index=index,
        steps=steps,
        lhs_bits=report.lhs,
        rhs_bits=report.rhs,
        d_value=report.d_value,
        violated=report.violated,
    )


def _check_ensemble(req: SenmCheckRequest) -> SenmCheckResponse:
    spec, kernel, file_steps = load_ensemble(req.ensemble)
    steps = req.steps if req.steps is not None else file_steps
    if steps is None:
        raise ConfigError("number of steps not given (neither in file nor request)")
    report = _spec_report(0, spec, kernel, steps)
    return SenmCheckResponse(
        mode="ensemble",
        num_specs=1,
        min_d=report.d_value,
        seed=None,
        reports=[report],
    )


def _check_random(req: SenmCheckRequest) -> SenmCheckResponse:
    seed = req.seed if req.seed is not None else fresh_seed()
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    reports = []
    for i in range(req.random_specs):
        spec, kernel, steps = random_ensemble(rng)
        reports.append(_spec_report(i, spec, kernel, steps))
    return SenmCheckResponse(
        mode="random",
        num_specs=len(reports),
        min_d=min(r.d_value for r in reports),
        seed=seed,
        reports=reports,
    )


def _check_imitation(req: SenmCheckRequest) -> SenmCheckResponse:
    params, gamma = resolve_params(req)
    plan = _plan_or_max(params, gamma, req.L, req.n_d)
    step_table = step_conditional_probs(params, plan.step_power, form="rotation")
    quantum_end = step_conditional_probs(params, plan.n_d, form="rotation")
    initial = np.array([params.p0, 1.0 - params.p0])
    fit = fit_imitation(
        [step_table] * plan.L,
        initial,
        quantum_end_to_end=quantum_end,
    )
    quantum_d = closed_form_d(params.theta, plan.L, plan.n_d)
    imitation = ImitationReport(
        plan=plan_config(params, plan),
        residual=fit.residual,
        end_gap=fit.end_gap,
        classical_d=fit.classical_report.d_value,
        quantum_d=quantum_d,
        classical_end_to_end=fit.classical_end_to_end.tolist(),
        quantum_end_to_end=quantum_end.tolist(),
    )
    report = SenmSpecReport(
        index=0,
        steps=plan.L,
        lhs_bits=fit.classical_report.lhs,
        rhs_bits=fit.classical_report.rhs,
        d_value=fit.classical_report.d_value,
        violated=fit.classical_report.violated,
    )
    return SenmCheckResponse(
        mode="imitate",
        num_specs=1,
        min_d=report.d_value,
        seed=None,
        reports=[report],
        imitation=imitation,
    )
