"""Unit tests for the entropy machinery and the readout inequality."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from readoutineq.entropy import (
    ExperimentPlan,
    ReadoutStats,
    binary_entropy,
    chain_rule_audit,
    closed_form_d,
    conditional_entropy,
    d_min_theoretical,
    evaluate_inequality,
    h,
    max_violation_plan,
    plan_for,
)
from readoutineq.errors import (
    IncompleteStatsError,
    InvalidDistributionError,
    PlanError,
)
from readoutineq.montecarlo import exact_conditionals
from readoutineq.qaa import QaaParams
from readoutineq.senm import GrandJoint, conditional_readouts

H_03 = 0.4275017710560214  # 40-digit evaluation of h(0.3)

# Frozen 40-digit closed-form evaluations of the maximum violation, keyed by
# the problem-scale exponent (theta = sqrt(10**-gamma)).
D_MIN_FROZEN = {
    3: -0.714811924398,
    4: -0.883572747526,
    5: -0.955226525237,
    6: -0.983220751415,
    7: -0.993865430250,
    8: -0.997799456869,
}

# Reported reference values for the same quantity.
D_MIN_REPORTED = {3: -0.714, 4: -0.884, 5: -0.955, 6: -0.983}


class TestBinaryEntropyOfSinSq:
    def test_deterministic_is_zero(self):
        assert h(0.0) == 0.0
        assert h(math.pi / 2) == pytest.approx(0.0, abs=1e-30)

    def test_balanced_is_one(self):
        assert h(math.pi / 4) == pytest.approx(1.0, abs=1e-15)

    def test_generic_value(self):
        assert h(0.3) == pytest.approx(H_03, abs=1e-14)

    def test_array_input(self):
        vals = h(np.array([0.0, math.pi / 4, 0.3]))
        assert vals.shape == (3,)
        assert vals[1] == pytest.approx(1.0, abs=1e-15)

    @given(st.floats(min_value=0.0, max_value=math.pi / 2))
    @settings(max_examples=300, deadline=None)
    def test_swap_symmetry(self, x):
        assert abs(h(x) - h(math.pi / 2 - x)) < 1e-12

    def test_domain_check(self):
        with pytest.raises(InvalidDistributionError):
            binary_entropy(1.5)
        with pytest.raises(InvalidDistributionError):
            binary_entropy(-0.1)


class TestConditionalEntropy:
    def test_perfect_correlation(self):
        assert conditional_entropy(np.diag([0.5, 0.5])) == 0.0

    def test_uniform_product(self):
        assert conditional_entropy(np.full((2, 2), 0.25)) == pytest.approx(1.0, abs=1e-15)

    def test_matches_h_for_step_table(self):
        # joint = uniform marginal x step conditionals at k*theta = 0.3
        stay, flip = math.cos(0.3) ** 2, math.sin(0.3) ** 2
        table = 0.5 * np.array([[stay, flip], [flip, stay]])
        assert conditional_entropy(table) == pytest.approx(h(0.3), abs=1e-13)

    def test_zero_rows_skipped(self):
        joint = np.array([[0.7, 0.3], [0.0, 0.0]])
        expected = -(0.7 * math.log2(0.7) + 0.3 * math.log2(0.3))
        assert conditional_entropy(joint) == pytest.approx(expected, abs=1e-14)

    def test_negative_entries_rejected(self):
        with pytest.raises(InvalidDistributionError):
            conditional_entropy(np.array([[0.6, -0.1], [0.3, 0.2]]))

    def test_unnormalized_rejected(self):
        with pytest.raises(InvalidDistributionError):
            conditional_entropy(np.array([[0.5, 0.5], [0.5, 0.5]]))


class TestExperimentPlan:
    def test_derived_scales(self):
        plan = ExperimentPlan.from_counts(n_c=49, L=25, n_d=25, gamma=3)
        assert plan.alpha == pytest.approx(math.log(25) / math.log(49))
        assert plan.alpha == plan.beta
        assert plan.step_power == 1

    @pytest.mark.parametrize(
        "L,n_d,n_c",
        [(0, 5, 10), (6, 5, 10), (2, 12, 10), (3, 10, 10)],
    )
    def test_invalid_plans_rejected(self, L, n_d, n_c):
        with pytest.raises(PlanError):
            ExperimentPlan.from_counts(n_c=n_c, L=L, n_d=n_d)

    def test_trivial_plan(self):
        plan = ExperimentPlan.from_counts(n_c=1, L=1, n_d=1)
        assert plan.alpha == 0.0 and plan.beta == 0.0

    def test_max_violation_plan(self):
        params = QaaParams.from_gamma(3)
        plan = max_violation_plan(params, gamma=3)
        assert (plan.L, plan.n_d, plan.n_c) == (25, 25, 49)


def _stats_from_tables(tables, marginal0):
    """Assemble minimal ReadoutStats from per-step conditionals."""
    L = len(tables)
    marginals = {0: np.asarray(marginal0, dtype=float)}
    joints = {}
    for j, t in enumerate(tables, start=1):
        joints[(j - 1, j)] = marginals[j - 1][:, None] * np.asarray(t)
        marginals[j] = joints[(j - 1, j)].sum(axis=0)
    if L > 1:
        product = np.eye(len(marginal0))
        for t in tables:
            product = product @ np.asarray(t)
        joints[(0, L)] = marginals[0][:, None] * product
    return ReadoutStats(
        symbols=("target", "rest"), last_step=L, joints=joints, marginals=marginals
    )


class TestEvaluateInequality:
    def test_single_step_is_exactly_zero(self):
        stats = _stats_from_tables([np.array([[0.8, 0.2], [0.4, 0.6]])], [0.5, 0.5])
        plan = ExperimentPlan.from_counts(n_c=1, L=1, n_d=1)
        report = evaluate_inequality(stats, plan)
        assert report.d_value == 0.0
        assert not report.violated

    def test_gamma3_max_violation(self):
        params = QaaParams.from_gamma(3)
        plan = max_violation_plan(params)
        report = evaluate_inequality(exact_conditionals(params, plan), plan)
        assert report.d_value == pytest.approx(D_MIN_REPORTED[3], abs=2e-3)
        assert report.violated

    @pytest.mark.parametrize("gamma,L_over", [(3, 25), (3, 5), (3, 1), (4, 79)])
    def test_reduces_to_closed_form(self, gamma, L_over):
        params = QaaParams.from_gamma(gamma)
        n_d = 25 if gamma == 3 else 79
        plan = plan_for(params, L_over, n_d)
        report = evaluate_inequality(exact_conditionals(params, plan), plan)
        assert report.d_value == pytest.approx(
            closed_form_d(params.theta, plan.L, plan.n_d), abs=1e-9
        )

    def test_missing_pair_table(self):
        stats = _stats_from_tables(
            [np.array([[0.8, 0.2], [0.4, 0.6]])] * 3, [0.5, 0.5]
        )
        pruned = ReadoutStats(
            symbols=stats.symbols,
            last_step=stats.last_step,
            joints={k: v for k, v in stats.joints.items() if k != (0, 3)},
            marginals=stats.marginals,
        )
        plan = ExperimentPlan.from_counts(n_c=3, L=3, n_d=3)
        with pytest.raises(IncompleteStatsError):
            evaluate_inequality(pruned, plan)

    def test_step_count_mismatch(self):
        stats = _stats_from_tables([np.eye(2) * 0.0 + np.array([[0.9, 0.1], [0.2, 0.8]])], [0.5, 0.5])
        plan = ExperimentPlan.from_counts(n_c=2, L=2, n_d=2)
        with pytest.raises(IncompleteStatsError):
            evaluate_inequality(stats, plan)


class TestDMinTheoretical:
    @pytest.mark.parametrize("gamma,frozen", sorted(D_MIN_FROZEN.items()))
    def test_frozen_values(self, gamma, frozen):
        assert d_min_theoretical(math.sqrt(10.0**-gamma)) == pytest.approx(
            frozen, abs=1e-11
        )

    @pytest.mark.parametrize("gamma,reported", sorted(D_MIN_REPORTED.items()))
    def test_reported_values(self, gamma, reported):
        assert d_min_theoretical(math.sqrt(10.0**-gamma)) == pytest.approx(
            reported, abs=2e-3
        )

    def test_monotone_decreasing_toward_minus_one(self):
        values = [d_min_theoretical(math.sqrt(10.0**-g)) for g in range(3, 9)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert all(v > -1.0 for v in values)

    def test_domain(self):
        with pytest.raises(PlanError):
            d_min_theoretical(1.0)
        with pytest.raises(PlanError):
            d_min_theoretical(0.0)


class TestReadoutStats:
    def test_marginal_consistency_enforced(self):
        joints = {(0, 1): np.full((2, 2), 0.25)}
        with pytest.raises(InvalidDistributionError):
            ReadoutStats(
                symbols=("a", "b"),
                last_step=1,
                joints=joints,
                marginals={0: np.array([0.9, 0.1]), 1: np.array([0.5, 0.5])},
            )

    def test_shape_enforced(self):
        with pytest.raises(InvalidDistributionError):
            ReadoutStats(
                symbols=("a", "b"),
                last_step=1,
                joints={(0, 1): np.full((3, 3), 1 / 9)},
                marginals={0: np.array([0.5, 0.5])},
            )

    def test_conditional_mask(self):
        joint = np.array([[0.7, 0.3], [0.0, 0.0]])
        stats = ReadoutStats(
            symbols=("a", "b"),
            last_step=1,
            joints={(0, 1): joint},
            marginals={0: np.array([1.0, 0.0]), 1: np.array([0.7, 0.3])},
        )
        cond, defined = stats.conditional(0, 1)
        assert defined.tolist() == [True, False]
        assert np.allclose(cond[0], [0.7, 0.3])
        assert np.all(cond[1] == 0.0)


class TestChainRuleAudit:
    def test_product_distribution(self):
        p = np.array([0.3, 0.7])
        q = np.array([0.6, 0.4])
        r = np.array([0.5, 0.5])
        grand = p[:, None, None] * q[None, :, None] * r[None, None, :]
        audit = chain_rule_audit(grand)
        marginal_entropies = [
            -(v * np.log2(v)).sum() for v in (p, q, r)
        ]
        assert np.allclose(audit.telescoping_terms, marginal_entropies, atol=1e-12)
        assert audit.all_ok

    def test_deterministic_chain_is_tight(self):
        grand = np.zeros((2, 2, 2))
        grand[0, 0, 0] = 0.5
        grand[1, 1, 1] = 0.5
        audit = chain_rule_audit(grand)
        assert audit.readout_lhs == 0.0
        assert audit.readout_rhs == 0.0
        assert audit.joint_entropy == pytest.approx(1.0, abs=1e-15)
        assert audit.all_ok

    def test_random_grand_joints(self):
        rng = np.random.default_rng(123)
        for _ in range(300):
            L = int(rng.integers(1, 4))
            grand = rng.dirichlet(np.ones(2 ** (L + 1))).reshape((2,) * (L + 1))
            audit = chain_rule_audit(grand)
            assert audit.chain_rule_gap < 1e-9
            assert audit.all_ok

    def test_invalid_distribution(self):
        with pytest.raises(InvalidDistributionError):
            chain_rule_audit(np.full((2, 2), 0.3))
        with pytest.raises(InvalidDistributionError):
            chain_rule_audit(np.array([0.5, 0.5]))


def test_inequality_holds_for_random_grand_joints():
    # The inequality follows from the existence of a valid grand joint, so
    # statistics extracted from any such joint can never violate it.
    rng = np.random.default_rng(2024)
    worst = np.inf
    for _ in range(500):
        L = int(rng.integers(1, 5))
        grand = GrandJoint(
            symbols=("tau", "not_tau"),
            probs=rng.dirichlet(np.ones(2 ** (L + 1))).reshape((2,) * (L + 1)),
        )
        stats = conditional_readouts(grand)
        plan = ExperimentPlan.from_counts(n_c=L, L=L, n_d=L)
        worst = min(worst, evaluate_inequality(stats, plan).d_value)
    assert worst >= -1e-9
