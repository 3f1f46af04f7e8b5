"""Shannon-entropy machinery for the readout inequality.

All entropies are in bits; the convention ``0 * log 0 = 0`` applies
throughout, so deterministic chains contribute zero.  Probability tables are
validated (nonnegative, normalized within ``DISTRIBUTION_TOL``) rather than
silently renormalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import IncompleteStatsError, InvalidDistributionError, PlanError
from .qaa import QaaParams, closest_integer

LN2 = math.log(2.0)
DISTRIBUTION_TOL = 1e-9
VIOLATION_TOL = 1e-9


def binary_entropy(p):
    """Entropy in bits of a (p, 1-p) distribution; scalar or array."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr < 0.0) or np.any(p_arr > 1.0):
        raise InvalidDistributionError("binary_entropy argument outside [0, 1]")
    out = np.zeros_like(p_arr)
    inner = (p_arr > 0.0) & (p_arr < 1.0)
    pv = p_arr[inner]
    # log1p keeps the complement term accurate for tiny p.
    out[inner] = -pv * np.log2(pv) - (1.0 - pv) * np.log1p(-pv) / LN2
    return float(out) if np.isscalar(p) or p_arr.ndim == 0 else out


def h(x):
    """Binary entropy of ``sin(x)**2`` in bits; scalar or array."""
    return binary_entropy(np.square(np.sin(np.asarray(x, dtype=float))))


def shannon_entropy(p: np.ndarray) -> float:
    """Entropy in bits of a flat distribution (no validation)."""
    p = np.asarray(p, dtype=float).ravel()
    support = p[p > 0.0]
    return float(-np.sum(support * np.log2(support)))


def _check_distribution(table: np.ndarray, what: str) -> np.ndarray:
    table = np.asarray(table, dtype=float)
    if np.any(table < 0.0):
        raise InvalidDistributionError(f"{what} has negative entries")
    total = float(table.sum())
    if abs(total - 1.0) > DISTRIBUTION_TOL:
        raise InvalidDistributionError(
            f"{what} sums to {total!r}, outside 1 +/- {DISTRIBUTION_TOL}"
        )
    return table


def conditional_entropy(joint: np.ndarray) -> float:
    """H(col | row) in bits from a joint table with conditioning on rows.

    Rows with zero marginal carry zero weight and are skipped, matching the
    ``0 log 0`` convention.
    """
    joint = _check_distribution(joint, "joint table")
    row_marginal = joint.sum(axis=1, keepdims=True)
    mask = joint > 0.0
    vals = joint[mask]
    denom = np.broadcast_to(row_marginal, joint.shape)[mask]
    return float(-np.sum(vals * (np.log2(vals) - np.log2(denom))))


@dataclass(frozen=True)
class ExperimentPlan:
    """Cut structure of an inequality test.

    ``L`` steps of ``n_d/L`` iterations each, out of a budget bounded by the
    critical count ``n_c``; ``alpha``/``beta`` are the log_{n_c}-scaled
    versions of ``L``/``n_d``.
    """

    L: int
    n_d: int
    n_c: int
    alpha: float
    beta: float
    gamma: float | None = None

    def __post_init__(self) -> None:
        if not (1 <= self.L <= self.n_d <= self.n_c):
            raise PlanError(
                f"need 1 <= L <= n_d <= n_c, got L={self.L}, n_d={self.n_d},"
                f" n_c={self.n_c}"
            )
        if self.n_d % self.L != 0:
            raise PlanError(
                f"n_d = {self.n_d} is not a multiple of L = {self.L}"
            )
        if abs(self.alpha - _log_scale(self.L, self.n_c)) > 1e-12:
            raise PlanError("alpha inconsistent with log_{n_c} L")
        if abs(self.beta - _log_scale(self.n_d, self.n_c)) > 1e-12:
            raise PlanError("beta inconsistent with log_{n_c} n_d")

    @property
    def step_power(self) -> int:
        return self.n_d // self.L

    @classmethod
    def from_counts(
        cls, n_c: int, L: int, n_d: int, gamma: float | None = None
    ) -> "ExperimentPlan":
        if not (1 <= L <= n_d <= n_c):
            raise PlanError(
                f"need 1 <= L <= n_d <= n_c, got L={L}, n_d={n_d}, n_c={n_c}"
            )
        return cls(
            L=L,
            n_d=n_d,
            n_c=n_c,
            alpha=_log_scale(L, n_c),
            beta=_log_scale(n_d, n_c),
            gamma=gamma,
        )


def _log_scale(value: int, n_c: int) -> float:
    # n_c = 1 forces value = 1; define the scale as 0 there.
    if value == 1:
        return 0.0
    return math.log(value) / math.log(n_c)


def plan_for(params: QaaParams, L: int, n_d: int, gamma: float | None = None) -> ExperimentPlan:
    """Plan with the critical count derived from the problem parameters."""
    return ExperimentPlan.from_counts(params.n_c, L, n_d, gamma=gamma)


def max_violation_plan(params: QaaParams, gamma: float | None = None) -> ExperimentPlan:
    """The single-iteration-per-step plan ``L = n_d = CI(pi/(4 theta))``."""
    L = min(params.n_c, max(1, closest_integer(math.pi / (4.0 * params.theta))))
    return ExperimentPlan.from_counts(params.n_c, L, L, gamma=gamma)


@dataclass(frozen=True)
class ReadoutStats:
    """Pairwise readout statistics across the steps of one experiment.

    ``joints[(l, lp)]`` is the joint symbol table for steps ``l < lp`` with
    rows indexed by the step-``l`` symbol; ``marginals[l]`` is the symbol
    distribution at step ``l``.  Row sums of each joint must reproduce the
    stored marginal of its first step.
    """

    symbols: tuple[str, ...]
    last_step: int
    joints: Mapping[tuple[int, int], np.ndarray]
    marginals: Mapping[int, np.ndarray]

    def __post_init__(self) -> None:
        n = len(self.symbols)
        for l, marg in self.marginals.items():
            if not 0 <= l <= self.last_step:
                raise InvalidDistributionError(f"marginal step {l} out of range")
            _check_distribution(np.asarray(marg), f"marginal at step {l}")
        for (l, lp), table in self.joints.items():
            if not (0 <= l < lp <= self.last_step):
                raise InvalidDistributionError(f"joint pair ({l}, {lp}) out of range")
            table = np.asarray(table)
            if table.shape != (n, n):
                raise InvalidDistributionError(
                    f"joint ({l}, {lp}) has shape {table.shape}, expected {(n, n)}"
                )
            _check_distribution(table, f"joint ({l}, {lp})")
            if l in self.marginals:
                rows = table.sum(axis=1)
                if np.max(np.abs(rows - np.asarray(self.marginals[l]))) > DISTRIBUTION_TOL:
                    raise InvalidDistributionError(
                        f"joint ({l}, {lp}) rows disagree with the step-{l} marginal"
                    )

    def joint(self, l: int, lp: int) -> np.ndarray:
        try:
            return np.asarray(self.joints[(l, lp)], dtype=float)
        except KeyError:
            raise IncompleteStatsError(
                f"no joint table for step pair ({l}, {lp})"
            ) from None

    def conditional(self, l: int, lp: int) -> tuple[np.ndarray, np.ndarray]:
        """Conditional table P(m_lp | m_l) and a row-defined mask.

        Rows conditioned on zero-probability symbols are undefined; they are
        returned as zeros with ``defined`` False rather than fabricated.
        """
        joint = self.joint(l, lp)
        rows = joint.sum(axis=1)
        defined = rows > 0.0
        cond = np.zeros_like(joint)
        cond[defined] = joint[defined] / rows[defined, None]
        return cond, defined


@dataclass(frozen=True)
class ViolationReport:
    """Outcome of one readout-inequality evaluation."""

    plan: ExperimentPlan
    lhs: float
    rhs: float
    d_value: float
    violated: bool


def evaluate_inequality(stats: ReadoutStats, plan: ExperimentPlan) -> ViolationReport:
    """Evaluate H(M_L | M_0) against the summed step entropies.

    Returns the report with ``d_value = rhs - lhs``; a value below
    ``-VIOLATION_TOL`` counts as a violation.
    """
    if stats.last_step != plan.L:
        raise IncompleteStatsError(
            f"stats cover {stats.last_step} steps but the plan has L = {plan.L}"
        )
    lhs = conditional_entropy(stats.joint(0, plan.L))
    rhs = 0.0
    for j in range(1, plan.L + 1):
        rhs += conditional_entropy(stats.joint(j - 1, j))
    d = rhs - lhs
    return ViolationReport(
        plan=plan, lhs=lhs, rhs=rhs, d_value=d, violated=d < -VIOLATION_TOL
    )


def closed_form_d(theta: float, L: int, n_d: int) -> float:
    """Violation quantity ``L h((n_d/L) theta) - h(n_d theta)``."""
    return L * float(h((n_d / L) * theta)) - float(h(n_d * theta))


def d_min_theoretical(theta: float) -> float:
    """Closed-form maximum violation at ``L = n_d = CI(pi/(4 theta))``."""
    if not 0.0 < theta < math.pi / 4.0:
        raise PlanError(f"theta must lie in (0, pi/4), got {theta}")
    L = closest_integer(math.pi / (4.0 * theta))
    return closed_form_d(theta, L, L)


@dataclass(frozen=True)
class ChainRuleAudit:
    """Numerical audit of the entropy identities behind the inequality."""

    joint_entropy: float
    telescoping_terms: tuple[float, ...]
    conditioning_pairs: tuple[tuple[float, float], ...]
    monotonicity_pairs: tuple[tuple[float, float], ...]
    readout_lhs: float
    readout_rhs: float
    tolerance: float

    @property
    def chain_rule_gap(self) -> float:
        return abs(self.joint_entropy - sum(self.telescoping_terms))

    @property
    def chain_rule_ok(self) -> bool:
        return self.chain_rule_gap <= self.tolerance

    @property
    def conditioning_ok(self) -> bool:
        return all(full <= pair + self.tolerance for full, pair in self.conditioning_pairs)

    @property
    def monotonicity_ok(self) -> bool:
        return all(pair <= full + self.tolerance for pair, full in self.monotonicity_pairs)

    @property
    def readout_ok(self) -> bool:
        return self.readout_lhs <= self.readout_rhs + self.tolerance

    @property
    def all_ok(self) -> bool:
        return (
            self.chain_rule_ok
            and self.conditioning_ok
            and self.monotonicity_ok
            and self.readout_ok
        )


def _conditional_entropy_on_history(joint_nd: np.ndarray) -> float:
    """H(last axis | all leading axes) of an n-dimensional joint."""
    denom = joint_nd.sum(axis=-1, keepdims=True)
    mask = joint_nd > 0.0
    vals = joint_nd[mask]
    den = np.broadcast_to(denom, joint_nd.shape)[mask]
    return float(-np.sum(vals * (np.log2(vals) - np.log2(den))))


def chain_rule_audit(grand: np.ndarray, tolerance: float = 1e-9) -> ChainRuleAudit:
    """Audit the chain rule and conditioning inequalities on a grand joint.

    ``grand`` is the full distribution over symbol sequences, one axis per
    step.  The audit recomputes each conditional entropy explicitly (no
    algebraic shortcuts), so the reported identities are genuine numerical
    checks.
    """
    grand = _check_distribution(np.asarray(grand, dtype=float), "grand joint")
    L = grand.ndim - 1
    if L < 1:
        raise InvalidDistributionError("grand joint needs at least two steps")

    def upto(j: int) -> np.ndarray:
        return grand.sum(axis=tuple(range(j + 1, L + 1)))

    def pair(l: int, lp: int) -> np.ndarray:
        other = tuple(ax for ax in range(L + 1) if ax not in (l, lp))
        return grand.sum(axis=other)

    terms = [shannon_entropy(upto(0))]
    for j in range(1, L + 1):
        terms.append(_conditional_entropy_on_history(upto(j)))

    conditioning = []
    monotonicity = []
    rhs = 0.0
    for j in range(1, L + 1):
        pairwise = conditional_entropy(pair(j - 1, j))
        conditioning.append((terms[j], pairwise))
        rhs += pairwise
        monotonicity.append((shannon_entropy(pair(0, j)) if j > 0 else 0.0,
                             shannon_entropy(upto(j))))
    lhs = conditional_entropy(pair(0, L))

    return ChainRuleAudit(
        joint_entropy=shannon_entropy(grand),
        telescoping_terms=tuple(terms),
        conditioning_pairs=tuple(conditioning),
        monotonicity_pairs=tuple(monotonicity),
        readout_lhs=lhs,
        readout_rhs=rhs,
        tolerance=tolerance,
    )
