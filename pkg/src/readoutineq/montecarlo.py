"""Finite-shot simulation of the inequality test and landscape scans.

Each trial estimates every conditional and marginal probability from a fixed
number of projective-measurement outcomes (binomial draws against the exact
two-outcome probabilities), assembles the empirical readout statistics, and
evaluates the inequality.  Shots are spent per conditioning symbol: every
row of every step table gets the full budget, and marginals are estimated
from fresh evolutions of the initial state, so there is no measurement
back-action across steps.

Sampling uses the reflection-product matrix representation; exact
closed-form evaluation uses the phase-matched rotation.  Randomness comes
from counter-based Philox streams spawned per trial, so runs are
reproducible and trials are independent.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

import numpy as np

from .entropy import (
    ExperimentPlan,
    ReadoutStats,
    _log_scale,
    closed_form_d,
    evaluate_inequality,
    max_violation_plan,
)
from .errors import ConfigError
from .qaa import (
    QaaParams,
    amplification_start,
    closest_integer,
    grover_full_matrix,
    matrix_power,
    step_conditional_probs,
)

DEFAULT_SHOTS = 10_000
DEFAULT_TRIALS = 1_000


def exact_conditionals(params: QaaParams, plan: ExperimentPlan) -> ReadoutStats:
    """Exact readout statistics of the phase-matched rotation dynamics."""
    k = plan.step_power
    theta = params.theta
    a0 = math.asin(math.sqrt(params.p0))
    step_table = step_conditional_probs(params, k, form="rotation")
    end_table = step_conditional_probs(params, plan.n_d, form="rotation")

    marginals = {}
    for j in range(plan.L + 1):
        p = math.sin(j * k * theta + a0) ** 2
        marginals[j] = np.array([p, 1.0 - p])
    joints = {
        (j - 1, j): marginals[j - 1][:, None] * step_table
        for j in range(1, plan.L + 1)
    }
    if plan.L > 1:
        joints[(0, plan.L)] = marginals[0][:, None] * end_table
    return ReadoutStats(
        symbols=("target", "rest"),
        last_step=plan.L,
        joints=joints,
        marginals=marginals,
    )


def _empirical_rows(
    exact_table: np.ndarray, shots: int, rng: np.random.Generator
) -> np.ndarray:
    """Sample each row of a 2x2 table from ``shots`` binary outcomes."""
    # squared moduli can overshoot 1 by a few ulps
    counts = rng.binomial(shots, np.clip(exact_table[:, 0], 0.0, 1.0))
    first = counts / shots
    return np.column_stack([first, (shots - counts) / shots])


def sample_conditionals(
    params: QaaParams,
    plan: ExperimentPlan,
    shots: int = DEFAULT_SHOTS,
    rng: np.random.Generator | None = None,
) -> ReadoutStats:
    """Empirical readout statistics from finite measurement shots."""
    if shots < 1:
        raise ConfigError(f"shots must be positive, got {shots}")
    if rng is None:
        rng = np.random.default_rng()
    gate = grover_full_matrix(params)
    step = matrix_power(gate, plan.step_power).entries
    # table[i, j] = |<j|G^k|i>|^2
    step_table = np.abs(step.T) ** 2

    # Marginal probabilities from fresh evolutions of the initial state.
    psi = amplification_start(params.p0, form="full").as_vector()
    marginal_probs = np.empty(plan.L + 1)
    marginal_probs[0] = params.p0
    for j in range(1, plan.L + 1):
        psi = step @ psi
        marginal_probs[j] = abs(psi[0]) ** 2
    counts = rng.binomial(shots, np.clip(marginal_probs, 0.0, 1.0))
    emp_marginals = {
        j: np.array([counts[j] / shots, (shots - counts[j]) / shots])
        for j in range(plan.L + 1)
    }

    joints = {}
    for j in range(1, plan.L + 1):
        emp_cond = _empirical_rows(step_table, shots, rng)
        joints[(j - 1, j)] = emp_marginals[j - 1][:, None] * emp_cond
    if plan.L > 1:
        end_table = np.abs(matrix_power(gate, plan.n_d).entries.T) ** 2
        emp_end = _empirical_rows(end_table, shots, rng)
        joints[(0, plan.L)] = emp_marginals[0][:, None] * emp_end
    return ReadoutStats(
        symbols=("target", "rest"),
        last_step=plan.L,
        joints=joints,
        marginals=emp_marginals,
    )


@dataclass(frozen=True)
class McConfig:
    """One inequality-test estimation run."""

    params: QaaParams
    plan: ExperimentPlan
    shots: int = DEFAULT_SHOTS
    trials: int = DEFAULT_TRIALS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.shots < 1 or self.trials < 1:
            raise ConfigError("shots and trials must be positive")


@dataclass(frozen=True)
class McResult:
    """Violation-quantity estimate across independent trials."""

    d_mean: float
    d_std: float
    d_stderr: float
    per_trial_d: tuple[float, ...]
    theory_d: float
    config: McConfig


def trial_rngs(seed: int, trials: int) -> list[np.random.Generator]:
    """Independent counter-based substreams, one per trial."""
    root = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.Philox(child)) for child in root.spawn(trials)]


def estimate_d(config: McConfig) -> McResult:
    """Run ``trials`` independent sampled inequality tests."""
    values = []
    for rng in trial_rngs(config.seed, config.trials):
        stats = sample_conditionals(config.params, config.plan, config.shots, rng)
        values.append(evaluate_inequality(stats, config.plan).d_value)
    arr = np.asarray(values)
    std = float(arr.std(ddof=1)) if config.trials > 1 else 0.0
    return McResult(
        d_mean=float(arr.mean()),
        d_std=std,
        d_stderr=std / math.sqrt(config.trials),
        per_trial_d=tuple(float(v) for v in values),
        theory_d=closed_form_d(
            config.params.theta, config.plan.L, config.plan.n_d
        ),
        config=config,
    )


@dataclass(frozen=True)
class LandscapeCell:
    """One feasible (beta, alpha) grid point."""

    beta: float
    alpha: float
    L: int
    n_d: int
    d: float
    d_std: float | None = None


@dataclass(frozen=True)
class LandscapeResult:
    params: QaaParams
    mode: str
    cells: tuple[LandscapeCell, ...]
    slices: Mapping[int, tuple[LandscapeCell, ...]]


def _divisors(n: int) -> list[int]:
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def _nearest_divisor(n: int, target: float) -> int:
    return min(_divisors(n), key=lambda d: (abs(d - target), d))


def landscape_scan(
    params: QaaParams,
    resolution: int = 25,
    mode: Literal["exact", "sampled"] = "exact",
    shots: int = DEFAULT_SHOTS,
    trials: int = 20,
    seed: int = 0,
    include_slices: bool = True,
    gamma: float | None = None,
) -> LandscapeResult:
    """Scan the violation quantity over the feasible (beta, alpha) region.

    Each nominal grid point maps to the nearest feasible integer pair: the
    iteration budget is the closest integer to ``n_c**beta`` and the step
    count the divisor of it closest to ``n_c**alpha``.  Duplicate pairs are
    emitted once, at their actual (beta, alpha) coordinates.
    """
    if resolution < 2:
        raise ConfigError(f"resolution must be at least 2, got {resolution}")
    if mode not in ("exact", "sampled"):
        raise ConfigError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    n_c = params.n_c
    pairs = {}
    grid = np.linspace(0.0, 1.0, resolution)
    for beta in grid:
        n_d = min(n_c, max(1, closest_integer(n_c**beta)))
        for alpha in grid[grid <= beta + 1e-12]:
            L = _nearest_divisor(n_d, n_c**alpha)
            pairs.setdefault((L, n_d), None)
    if not pairs:
        raise ConfigError("no feasible grid cells")

    cell_rngs = iter(trial_rngs(seed, len(pairs)))
    cells = []
    for L, n_d in sorted(pairs, key=lambda p: (p[1], p[0])):
        plan = ExperimentPlan.from_counts(n_c, L, n_d, gamma=gamma)
        if mode == "exact":
            d, d_std = closed_form_d(params.theta, L, n_d), None
        else:
            rng = next(cell_rngs)
            sub_seed = int(rng.integers(0, 2**63 - 1))
            result = estimate_d(
                McConfig(params=params, plan=plan, shots=shots, trials=trials, seed=sub_seed)
            )
            d, d_std = result.d_mean, result.d_std
        cells.append(
            LandscapeCell(
                beta=_log_scale(n_d, n_c),
                alpha=_log_scale(L, n_c),
                L=L,
                n_d=n_d,
                d=d,
                d_std=d_std,
            )
        )

    slices: dict[int, tuple[LandscapeCell, ...]] = {}
    if include_slices:
        slice_ls = sorted({2, 3, 4, closest_integer(math.pi / (4 * params.theta))})
        for L in slice_ls:
            if L > n_c:
                continue
            rows = []
            for n_d in range(L, n_c + 1, L):
                rows.append(
                    LandscapeCell(
                        beta=_log_scale(n_d, n_c),
                        alpha=_log_scale(L, n_c),
                        L=L,
                        n_d=n_d,
                        d=closed_form_d(params.theta, L, n_d),
                    )
                )
            slices[L] = tuple(rows)
    return LandscapeResult(params=params, mode=mode, cells=tuple(cells), slices=slices)


def grid_to_csv(cells: Sequence[LandscapeCell]) -> str:
    """Render landscape cells as CSV (beta, alpha, L, n_d, D [, d_std])."""
    with_std = any(c.d_std is not None for c in cells)
    out = io.StringIO()
    header = "beta,alpha,L,n_d,D"
    out.write(header + (",d_std\n" if with_std else "\n"))
    for c in cells:
        row = f"{c.beta:.10g},{c.alpha:.10g},{c.L},{c.n_d},{c.d:.12g}"
        if with_std:
            row += f",{'' if c.d_std is None else format(c.d_std, '.12g')}"
        out.write(row + "\n")
    return out.getvalue()


def default_plan(params: QaaParams, gamma: float | None = None) -> ExperimentPlan:
    """The maximum-violation plan for these parameters."""
    return max_violation_plan(params, gamma=gamma)
