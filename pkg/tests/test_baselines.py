"""Tests for the i.i.d. sampling baselines."""

import numpy as np
import pytest

import fourier_audit as fa


class TestBaselineSpec:
    def test_sample_count_must_be_positive(self):
        with pytest.raises(fa.InvalidParameterError):
            fa.BaselineSpec(property=fa.Robustness(rho=0.5), m=0)

    def test_robustness_resolves_to_flip(self):
        spec = fa.BaselineSpec(property=fa.Robustness(rho=0.25), m=10)
        pert = spec.resolved_perturbation()
        assert isinstance(pert, fa.Flip)
        assert pert.rho == 0.25

    def test_individual_fairness_resolves_to_flipl(self):
        spec = fa.BaselineSpec(property=fa.IndividualFairness(rho=0.5, l=2), m=10)
        pert = spec.resolved_perturbation()
        assert isinstance(pert, fa.FlipL)
        assert (pert.rho, pert.l) == (0.5, 2)

    def test_explicit_perturbation_wins(self):
        spec = fa.BaselineSpec(
            property=fa.Robustness(rho=0.5), m=10, perturbation=fa.Flip(-1.0)
        )
        assert spec.resolved_perturbation().rho == -1.0

    def test_group_property_has_no_perturbation(self):
        spec = fa.BaselineSpec(property=fa.StatisticalParity(1), m=10)
        with pytest.raises(fa.InvalidParameterError):
            spec.resolved_perturbation()


class TestDisagreementBaseline:
    def test_constant_model_flip_probability_zero(self):
        model = fa.build_model("constant:1", n=4)
        spec = fa.BaselineSpec(property=fa.Robustness(rho=0.5), m=500)
        rep = fa.uniform_estimate(model, fa.Uniform(4), spec, rng=0)
        assert rep.estimate == 0.0
        assert rep.companions["correlation"] == 1.0

    def test_dictator_flip_probability_closed_form(self):
        # a single-coordinate model disagrees exactly when its coordinate
        # flips, which happens with probability (1 - rho) / 2
        model = fa.build_model("dictator:1", n=4)
        spec = fa.BaselineSpec(property=fa.Robustness(rho=0.5), m=100_000)
        rep = fa.uniform_estimate(model, fa.Uniform(4), spec, rng=1)
        assert rep.estimate == pytest.approx(0.25, abs=0.01)
        assert rep.method == "Uniform"

    def test_query_accounting_pairs(self):
        model = fa.build_model("maj3", n=3)
        spec = fa.BaselineSpec(property=fa.Robustness(rho=0.5), m=123)
        budget = fa.AuditBudget(10_000)
        rep = fa.uniform_estimate(model, fa.Uniform(3), spec, rng=2, budget=budget)
        assert rep.queries_used == 2 * 123
        assert budget.consumed == 2 * 123

    def test_budget_exhaustion_propagates_unconsumed(self):
        model = fa.build_model("maj3", n=3)
        spec = fa.BaselineSpec(property=fa.Robustness(rho=0.5), m=50)
        budget = fa.AuditBudget(10)
        with pytest.raises(fa.BudgetExceededError):
            fa.uniform_estimate(model, fa.Uniform(3), spec, rng=3, budget=budget)
        assert budget.consumed == 0

    def test_individual_fairness_close_to_exact(self, maj3):
        exact = fa.exact_property(
            maj3, fa.Uniform(3), fa.IndividualFairness(rho=0.5, l=2)
        )
        spec = fa.BaselineSpec(property=fa.IndividualFairness(rho=0.5, l=2), m=60_000)
        rep = fa.uniform_estimate(maj3, fa.Uniform(3), spec, rng=4)
        assert rep.estimate == pytest.approx(exact.value, abs=0.01)

    def test_same_seed_is_deterministic(self, maj3):
        spec = fa.BaselineSpec(property=fa.Robustness(rho=0.25), m=400)
        a = fa.uniform_estimate(maj3, fa.Uniform(3), spec, rng=7)
        b = fa.uniform_estimate(maj3, fa.Uniform(3), spec, rng=7)
        assert a.estimate == b.estimate

    def test_unbiased_against_exact_oracle(self, maj3):
        exact = fa.exact_property(maj3, fa.Uniform(3), fa.Robustness(rho=0.5))
        spec = fa.BaselineSpec(property=fa.Robustness(rho=0.5), m=400)
        draws = np.array(
            [
                fa.uniform_estimate(maj3, fa.Uniform(3), spec, rng=seed).estimate
                for seed in range(100)
            ]
        )
        se = draws.std(ddof=1) / np.sqrt(len(draws))
        assert abs(draws.mean() - exact.value) <= 2 * se + 1e-12


class TestGroupBaseline:
    def test_dictator_extreme_disparity(self):
        model = fa.build_model("dictator:1", n=4)
        spec = fa.BaselineSpec(property=fa.StatisticalParity(1), m=10_000)
        rep = fa.uniform_estimate(model, fa.Uniform(4), spec, rng=0)
        assert rep.estimate == 1.0
        assert rep.companions["g_plus"] == 1.0
        assert rep.companions["g_minus"] == 0.0

    def test_maj3_gap_close_to_exact(self, maj3):
        exact = fa.exact_property(maj3, fa.Uniform(3), fa.StatisticalParity(1))
        spec = fa.BaselineSpec(property=fa.StatisticalParity(1), m=40_000)
        rep = fa.uniform_estimate(maj3, fa.Uniform(3), spec, rng=5)
        assert rep.estimate == pytest.approx(exact.value, abs=0.02)

    def test_query_accounting_per_group(self, maj3):
        spec = fa.BaselineSpec(property=fa.StatisticalParity(1), m=101)
        budget = fa.AuditBudget(10_000)
        rep = fa.uniform_estimate(maj3, fa.Uniform(3), spec, rng=6, budget=budget)
        # each group is sampled to its quota of ceil(m/2) accepted points
        assert rep.queries_used == 2 * 51
        assert budget.consumed == rep.queries_used

    def test_starved_group_names_the_group(self):
        # the +1 group never occurs when the coordinate is pinned to -1
        model = fa.build_model("maj3", n=3)
        dist = fa.Product((-1.0, 0.0, 0.0))
        spec = fa.BaselineSpec(property=fa.StatisticalParity(1), m=8)
        with pytest.raises(fa.StarvedGroupError) as err:
            fa.uniform_estimate(model, dist, spec, rng=0)
        assert err.value.group == 1
        assert "x_1=+1" in str(err.value)

    def test_biased_group_alpha_observed(self, maj3):
        dist = fa.Product((-0.5, 0.0, 0.0))
        spec = fa.BaselineSpec(property=fa.StatisticalParity(1), m=2_000)
        rep = fa.uniform_estimate(maj3, dist, spec, rng=8)
        assert rep.details["alpha_observed"] == pytest.approx(0.25, abs=0.03)

    def test_multiclass_max_over_labels(self, frozen):
        info = frozen["mc_lookup_n6"]
        table = np.random.default_rng(int(info["seed"])).integers(0, 3, size=64)
        model = fa.LookupTable(table, arity=3)
        spec = fa.BaselineSpec(property=fa.Multicalibration(1), m=30_000)
        rep = fa.uniform_estimate(model, fa.Uniform(6), spec, rng=9)
        assert rep.estimate == pytest.approx(info["exact_mc"], abs=0.03)
        assert rep.companions["arg_label"] in (0.0, 1.0, 2.0)

    def test_unknown_property_rejected(self, maj3):
        class Odd:
            name = "odd"

        spec = fa.BaselineSpec.__new__(fa.BaselineSpec)
        object.__setattr__(spec, "property", Odd())
        object.__setattr__(spec, "m", 10)
        object.__setattr__(spec, "perturbation", None)
        with pytest.raises(fa.InvalidParameterError):
            fa.uniform_estimate(maj3, fa.Uniform(3), spec, rng=0)
