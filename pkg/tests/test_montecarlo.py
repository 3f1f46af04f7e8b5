"""Tests for the finite-shot protocol and landscape scans."""

import math

import numpy as np
import pytest

from readoutineq.entropy import ExperimentPlan, closed_form_d, evaluate_inequality, h
from readoutineq.errors import ConfigError
from readoutineq.montecarlo import (
    McConfig,
    estimate_d,
    exact_conditionals,
    grid_to_csv,
    landscape_scan,
    sample_conditionals,
    trial_rngs,
)
from readoutineq.entropy import max_violation_plan, plan_for
from readoutineq.qaa import QaaParams, step_conditional_probs


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


class TestExactConditionals:
    def test_marginals_follow_sine_law(self):
        params = QaaParams.from_gamma(3)
        plan = plan_for(params, 5, 25)
        stats = exact_conditionals(params, plan)
        a0 = math.asin(math.sqrt(params.p0))
        for j in range(6):
            expected = math.sin(j * 5 * params.theta + a0) ** 2
            assert stats.marginals[j][0] == pytest.approx(expected, abs=1e-15)

    def test_reduces_to_closed_form(self):
        params = QaaParams.from_gamma(4)
        plan = max_violation_plan(params)
        report = evaluate_inequality(exact_conditionals(params, plan), plan)
        assert report.d_value == pytest.approx(
            closed_form_d(params.theta, plan.L, plan.n_d), abs=1e-9
        )


class TestSampleConditionals:
    def test_deterministic_flip_sampled_exactly(self):
        # three iterations of arctan(theta) = pi/6 per step: a quarter turn,
        # so the sampled table is exactly the deterministic flip.
        with pytest.warns(UserWarning):
            params = QaaParams.from_theta(math.tan(math.pi / 6))
        plan = ExperimentPlan.from_counts(n_c=3, L=1, n_d=3)
        for shots in (50, 2000):
            stats = sample_conditionals(params, plan, shots=shots, rng=philox(5))
            cond, defined = stats.conditional(0, 1)
            assert defined.all()
            assert np.array_equal(cond, np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_error_scales_with_shots(self):
        params = QaaParams.from_gamma(3)
        plan = max_violation_plan(params)
        exact = step_conditional_probs(params, 1, form="full")
        errors = {}
        for shots in (1_000, 10_000, 100_000):
            rng = philox(7)
            total = 0.0
            repeats = 30
            for _ in range(repeats):
                stats = sample_conditionals(params, plan, shots=shots, rng=rng)
                cond, _ = stats.conditional(0, 1)
                total += np.max(np.abs(cond - exact))
            errors[shots] = total / repeats
        assert errors[1_000] > errors[10_000] > errors[100_000]
        # O(1/sqrt(shots)): generous constant against the binomial std
        assert errors[100_000] < 5.0 / math.sqrt(100_000)

    def test_paper_scale_estimate(self):
        params = QaaParams.from_gamma(3)
        plan = max_violation_plan(params, gamma=3)
        result = estimate_d(
            McConfig(params=params, plan=plan, shots=10_000, trials=150, seed=11)
        )
        # reported simulation: -0.703 +/- 0.013 against theory -0.714
        assert abs(result.d_mean - result.theory_d) <= 3 * result.d_std
        assert 0.004 <= result.d_std <= 0.04
        assert all(abs(d) <= plan.L for d in result.per_trial_d)


class TestEstimateD:
    def test_reproducible_under_seed(self):
        params = QaaParams.from_gamma(3)
        plan = max_violation_plan(params)
        config = McConfig(params=params, plan=plan, shots=500, trials=8, seed=21)
        first = estimate_d(config)
        second = estimate_d(config)
        assert first.per_trial_d == second.per_trial_d
        assert first.d_mean == second.d_mean

    def test_different_seeds_differ(self):
        params = QaaParams.from_gamma(3)
        plan = max_violation_plan(params)
        a = estimate_d(McConfig(params=params, plan=plan, shots=500, trials=4, seed=0))
        b = estimate_d(McConfig(params=params, plan=plan, shots=500, trials=4, seed=1))
        assert a.per_trial_d != b.per_trial_d

    def test_single_cut_gives_exact_zero(self):
        params = QaaParams.from_gamma(3)
        plan = plan_for(params, 1, 25)
        result = estimate_d(
            McConfig(params=params, plan=plan, shots=200, trials=16, seed=3)
        )
        assert result.per_trial_d == (0.0,) * 16
        assert result.d_std == 0.0

    def test_accuracy_improves_with_shots(self):
        params = QaaParams.from_gamma(3)
        plan = max_violation_plan(params)
        theory = closed_form_d(params.theta, plan.L, plan.n_d)
        medians = []
        for level, shots in enumerate((1_000, 10_000, 100_000)):
            gaps = []
            for repeat in range(15):
                result = estimate_d(
                    McConfig(
                        params=params,
                        plan=plan,
                        shots=shots,
                        trials=16,
                        seed=1000 * level + repeat,
                    )
                )
                gaps.append(abs(result.d_mean - theory))
            medians.append(float(np.median(gaps)))
        assert medians[0] > medians[1] > medians[2]

    def test_config_validation(self):
        params = QaaParams.from_gamma(3)
        plan = max_violation_plan(params)
        with pytest.raises(ConfigError):
            McConfig(params=params, plan=plan, shots=0)
        with pytest.raises(ConfigError):
            McConfig(params=params, plan=plan, trials=0)

    def test_trial_streams_are_independent_objects(self):
        streams = trial_rngs(5, 4)
        draws = {float(r.random()) for r in streams}
        assert len(draws) == 4


class TestLandscape:
    def test_exact_grid_minimum_on_diagonal_near_quarter_turn(self):
        # The deepest grid cell sits on the alpha = beta diagonal with
        # n_d * theta near the quarter turn.  The cell at L = n_d =
        # CI(pi/(4 theta)) reproduces the reported maximum violation; at this
        # coarse theta, neighboring diagonal cells dip a few percent deeper
        # (the two coincide as theta -> 0).
        params = QaaParams.from_gamma(3)
        result = landscape_scan(params, resolution=41, mode="exact", gamma=3)
        deepest = min(result.cells, key=lambda c: c.d)
        assert deepest.L == deepest.n_d
        assert deepest.alpha == pytest.approx(deepest.beta, abs=1e-12)
        assert abs(deepest.n_d * params.theta - math.pi / 4) < 0.12
        ci_cell = next(c for c in result.cells if (c.L, c.n_d) == (25, 25))
        assert ci_cell.d == pytest.approx(-0.714, abs=2e-3)
        assert ci_cell.d - 0.015 <= deepest.d <= ci_cell.d

    def test_single_step_cells_are_zero(self):
        params = QaaParams.from_gamma(3)
        result = landscape_scan(params, resolution=15, mode="exact")
        ones = [c for c in result.cells if c.L == 1]
        assert ones
        assert all(c.d == 0.0 for c in ones)

    def test_cells_respect_feasibility(self):
        params = QaaParams.from_gamma(4)
        result = landscape_scan(params, resolution=12, mode="exact")
        for c in result.cells:
            assert 1 <= c.L <= c.n_d <= params.n_c
            assert c.n_d % c.L == 0
            assert -1e-12 <= c.alpha <= c.beta + 1e-12 <= 1 + 1e-12

    def test_slices_cover_figure_lines(self):
        params = QaaParams.from_gamma(3)
        result = landscape_scan(params, resolution=8, mode="exact")
        assert set(result.slices) == {2, 3, 4, 25}
        for L, rows in result.slices.items():
            assert all(c.L == L for c in rows)
            assert rows[-1].n_d <= params.n_c

    def test_larger_slices_violate_more(self):
        # deepest D along the L-slice becomes more negative as L grows
        params = QaaParams.from_gamma(4)
        result = landscape_scan(params, resolution=8, mode="exact")
        minima = {
            L: min(c.d for c in rows) for L, rows in result.slices.items() if L in (2, 3, 4)
        }
        assert minima[4] < minima[3] < minima[2] < 0

    def test_sampled_grid_matches_exact_within_3_sigma(self):
        params = QaaParams.from_gamma(3)
        exact = landscape_scan(params, resolution=6, mode="exact", include_slices=False)
        sampled = landscape_scan(
            params,
            resolution=6,
            mode="sampled",
            shots=2_000,
            trials=12,
            seed=13,
            include_slices=False,
        )
        exact_by_cell = {(c.L, c.n_d): c.d for c in exact.cells}
        for cell in sampled.cells:
            reference = exact_by_cell[(cell.L, cell.n_d)]
            assert abs(cell.d - reference) <= max(3 * cell.d_std, 1e-9)

    def test_sampled_is_reproducible(self):
        params = QaaParams.from_gamma(3)
        kwargs = dict(
            resolution=5, mode="sampled", shots=300, trials=4, seed=2, include_slices=False
        )
        assert landscape_scan(params, **kwargs) == landscape_scan(params, **kwargs)

    def test_resolution_validation(self):
        with pytest.raises(ConfigError):
            landscape_scan(QaaParams.from_gamma(3), resolution=1)
        with pytest.raises(ConfigError):
            landscape_scan(QaaParams.from_gamma(3), mode="nope")


class TestCsv:
    def test_exact_columns(self):
        params = QaaParams.from_gamma(3)
        result = landscape_scan(params, resolution=6, mode="exact", include_slices=False)
        text = grid_to_csv(result.cells)
        lines = text.strip().splitlines()
        assert lines[0] == "beta,alpha,L,n_d,D"
        assert len(lines) == len(result.cells) + 1
        assert all(len(line.split(",")) == 5 for line in lines[1:])

    def test_sampled_adds_std_column(self):
        params = QaaParams.from_gamma(3)
        result = landscape_scan(
            params, resolution=4, mode="sampled", shots=200, trials=3, seed=1,
            include_slices=False,
        )
        lines = grid_to_csv(result.cells).strip().splitlines()
        assert lines[0] == "beta,alpha,L,n_d,D,d_std"


def test_theory_column_matches_d_min():
    # estimate_d's theory value at the max-violation plan equals the
    # closed-form maximum violation.
    from readoutineq.entropy import d_min_theoretical

    params = QaaParams.from_gamma(4)
    plan = max_violation_plan(params)
    result = estimate_d(McConfig(params=params, plan=plan, shots=100, trials=2, seed=0))
    assert result.theory_d == pytest.approx(d_min_theoretical(params.theta), abs=1e-15)
