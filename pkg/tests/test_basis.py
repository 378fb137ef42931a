"""Orthonormal function systems and exact coefficient tables."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fourier_audit as fa


def weighted_gram(basis, dist):
    """Gram matrix of all basis functions under the distribution, by enumeration."""
    pts = fa.enumerate_points(basis.n)
    if isinstance(dist, fa.Uniform):
        w = np.full(len(pts), 1.0 / len(pts))
    elif isinstance(dist, fa.Product):
        probs = (1 + np.asarray(dist.biases) * pts) / 2
        w = probs.prod(axis=1)
    else:
        idx = {int(i): k for k, i in enumerate(fa.point_index(dist.points))}
        w = np.zeros(len(pts))
        for k, i in enumerate(fa.point_index(pts)):
            if int(i) in idx:
                w[k] = dist.weights[idx[int(i)]]
    table = np.stack([basis.psi_batch(s, pts) for s in range(2 ** basis.n)])
    return (table * w) @ table.T


class TestParityEval:
    def test_empty_subset_is_one(self):
        pts = fa.enumerate_points(3)
        assert np.all(fa.parity_eval_batch(0, pts) == 1)
        assert fa.parity_eval(0, np.array([-1, -1, -1])) == 1

    def test_pair_subset(self):
        x = np.array([-1, 1, -1], dtype=np.int8)
        assert fa.parity_eval(0b011, x) == -1
        assert fa.parity_eval(0b101, x) == 1
        assert fa.parity_eval(0b111, x) == 1

    def test_all_minus_odd_cardinality(self):
        x = np.array([-1, -1, -1], dtype=np.int8)
        assert fa.parity_eval(0b111, x) == -1

    def test_batch_matches_single(self):
        pts = fa.enumerate_points(4)
        for mask in (0, 1, 5, 15):
            batch = fa.parity_eval_batch(mask, pts)
            singles = [fa.parity_eval(mask, p) for p in pts]
            assert list(batch) == singles

    @given(st.integers(min_value=0, max_value=63), st.integers(min_value=0, max_value=63))
    def test_parity_multiplicativity(self, s, t):
        pts = fa.enumerate_points(6)
        left = fa.parity_eval_batch(s, pts) * fa.parity_eval_batch(t, pts)
        assert np.array_equal(left, fa.parity_eval_batch(s ^ t, pts))


class TestUniformBasis:
    def test_uniform_psi_equals_parity(self):
        basis = fa.gram_schmidt_basis(fa.Uniform(4))
        pts = fa.enumerate_points(4)
        for s in range(16):
            assert np.array_equal(basis.psi_batch(s, pts), fa.parity_eval_batch(s, pts))
            assert basis.expansion(s) == {s: 1.0}

    def test_uniform_no_zero_flags(self):
        basis = fa.gram_schmidt_basis(fa.Uniform(5))
        assert basis.zero_flags == frozenset()


class TestProductBasis:
    def test_single_coordinate_standardization(self):
        basis = fa.gram_schmidt_basis(fa.Product((0.5, 0.0)))
        pts = fa.enumerate_points(2)
        sigma = np.sqrt(1 - 0.25)
        expected = (pts[:, 0] - 0.5) / sigma
        assert np.allclose(basis.psi_batch(1, pts), expected, atol=1e-12)

    def test_product_psi_factorizes(self):
        biases = (0.5, -0.25, 0.0)
        basis = fa.gram_schmidt_basis(fa.Product(biases))
        pts = fa.enumerate_points(3)
        sig = np.sqrt(1 - np.asarray(biases) ** 2)
        want = ((pts[:, 0] - 0.5) / sig[0]) * ((pts[:, 2] - 0.0) / sig[2])
        assert np.allclose(basis.psi_batch(0b101, pts), want, atol=1e-12)

    def test_orthonormal_under_product_measure(self):
        dist = fa.Product((0.3, -0.6, 0.0, 0.8))
        basis = fa.gram_schmidt_basis(dist)
        gram = weighted_gram(basis, dist)
        assert np.allclose(gram, np.eye(16), atol=1e-9)

    def test_degenerate_bias_flags_dependent_subsets(self):
        basis = fa.gram_schmidt_basis(fa.Product((1.0, 0.0)))
        assert basis.is_zero(0b01)
        assert basis.is_zero(0b11)
        assert not basis.is_zero(0b10)
        assert np.all(basis.psi_batch(0b01, fa.enumerate_points(2)) == 0.0)


class TestEmpiricalBasis:
    def constant_third_coordinate(self):
        pts = np.array(
            [[1, 1, 1], [-1, 1, 1], [1, -1, 1], [-1, -1, 1]], dtype=np.int8
        )
        return fa.Empirical(pts, np.full(4, 0.25))

    def test_vanishing_subsets_flagged(self):
        # x_3 is constant on the support, so every subset containing 3
        # collapses during orthogonalization.
        dist = self.constant_third_coordinate()
        basis = fa.gram_schmidt_basis(dist)
        assert basis.is_zero(0b100)
        assert basis.is_zero(0b110)
        assert not basis.is_zero(0b011)

    def test_surviving_directions_orthonormal(self):
        dist = self.constant_third_coordinate()
        basis = fa.gram_schmidt_basis(dist)
        live = [s for s in range(8) if not basis.is_zero(s)]
        table = np.stack([basis.psi_batch(s, dist.points) for s in live])
        gram = (table * dist.weights) @ table.T
        assert np.allclose(gram, np.eye(len(live)), atol=1e-9)

    def test_weighted_support_orthonormal(self):
        rng = np.random.default_rng(11)
        pts = fa.enumerate_points(4)
        keep = rng.permutation(16)[:9]
        w = rng.random(9)
        dist = fa.Empirical(pts[keep], w / w.sum())
        basis = fa.gram_schmidt_basis(dist)
        live = [s for s in range(16) if not basis.is_zero(s)]
        assert len(live) == 9
        table = np.stack([basis.psi_batch(s, dist.points) for s in live])
        gram = (table * dist.weights) @ table.T
        assert np.allclose(gram, np.eye(9), atol=1e-8)

    def test_deterministic_third_coordinate_support(self):
        # Support where x_3 = x_1 * x_2. In cardinality order {3} is
        # processed before {1,2}, so the singleton keeps the direction and
        # the pair vanishes; psi_{3} coincides with the pair parity there.
        pts = np.array(
            [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.int8
        )
        dist = fa.Empirical(pts, np.full(4, 0.25))
        basis = fa.gram_schmidt_basis(dist)
        assert not basis.is_zero(0b100)
        assert basis.is_zero(0b011)
        assert basis.is_zero(0b111)
        psi3 = basis.psi_batch(0b100, dist.points)
        pair = fa.parity_eval_batch(0b011, dist.points)
        assert np.allclose(psi3, pair, atol=1e-9)


class TestExactSpectrum:
    def test_dictator_spectrum(self):
        spec = fa.exact_fourier_spectrum(fa.build_model("dictator:2", n=4), fa.Uniform(4))
        assert spec.nonzero() == {0b0010: 1.0}

    def test_maj3_spectrum_matches_frozen(self, maj3, frozen):
        spec = fa.exact_fourier_spectrum(maj3, fa.Uniform(3))
        want = {int(k): v for k, v in frozen["maj3_spectrum"].items()}
        got = spec.nonzero()
        assert set(got) == set(want)
        for mask, coef in want.items():
            assert got[mask] == pytest.approx(coef, abs=1e-12)
        assert spec.parseval_total() == pytest.approx(1.0, abs=1e-12)
        assert spec.max_reconstruction_error < 1e-9

    def test_or_spectrum_matches_frozen(self, frozen):
        model = fa.LookupTable(np.array([1, 1, 1, -1]))
        spec = fa.exact_fourier_spectrum(model, fa.Uniform(2))
        want = {int(k): v for k, v in frozen["or_pm_spectrum"].items()}
        for mask in range(4):
            assert spec.coefficient(mask) == pytest.approx(want[mask], abs=1e-12)

    def test_xor_junta_fixed_convention(self, frozen):
        model = fa.build_model("xor:1,2", n=2)
        spec = fa.exact_fourier_spectrum(model, fa.Uniform(2))
        assert spec.nonzero() == {0b11: pytest.approx(-1.0)}
        pts = fa.enumerate_points(2)
        labels = model.query_batch(pts)
        truth = frozen["xor_truth"]
        for row, pt in enumerate(pts):
            key = f"{pt[0]:+d},{pt[1]:+d}"
            assert labels[row] == truth[key]

    def test_product_dist_parseval(self):
        dist = fa.Product((0.4, -0.2, 0.1))
        spec = fa.exact_fourier_spectrum(fa.build_model("maj3"), dist)
        assert spec.parseval_total() == pytest.approx(1.0, abs=1e-12)
        assert spec.max_reconstruction_error < 1e-9

    def test_empirical_dist_parseval(self):
        rng = np.random.default_rng(5)
        pts = fa.enumerate_points(4)
        keep = rng.permutation(16)[:11]
        w = rng.random(11)
        dist = fa.Empirical(pts[keep], w / w.sum())
        model = fa.random_ltf(4, fa.RandomSource(9))
        spec = fa.exact_fourier_spectrum(model, dist)
        assert spec.parseval_total() == pytest.approx(1.0, abs=1e-9)
        assert spec.max_reconstruction_error < 1e-9

    def test_bucket_weight_maj3(self, maj3, frozen):
        spec = fa.exact_fourier_spectrum(maj3, fa.Uniform(3))
        assert spec.bucket_weight(0b001, 1) == pytest.approx(frozen["maj3_bucket_s1_k1"], abs=1e-12)
        assert spec.bucket_weight(0, 0) == pytest.approx(1.0, abs=1e-12)

    def test_dimension_cap_enforced(self):
        with pytest.raises(fa.InvalidParameterError):
            fa.exact_fourier_spectrum(fa.build_model("dictator:1", n=13), fa.Uniform(13))

    def test_budget_charged_for_enumeration(self):
        budget = fa.AuditBudget(8)
        fa.exact_fourier_spectrum(fa.build_model("maj3"), fa.Uniform(3), budget=budget)
        assert budget.consumed == 8
        with pytest.raises(fa.BudgetExceededError):
            fa.exact_fourier_spectrum(fa.build_model("maj3"), fa.Uniform(3), budget=fa.AuditBudget(7))

    @settings(max_examples=10, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_parseval_random_models_property(self, seed):
        rng = fa.RandomSource(seed)
        model = fa.random_tree(5, depth=3, rng=rng)
        spec = fa.exact_fourier_spectrum(model, fa.Uniform(5))
        assert spec.parseval_total() == pytest.approx(1.0, abs=1e-9)
