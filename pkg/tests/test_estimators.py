"""Plug-in moment estimators: exact arithmetic, conditional means, invariants."""

import math

import numpy as np
import pytest

from kbsens import (
    ConditionalMeanPlan,
    GFunctionSpec,
    InputModel,
    KernelSpec,
    ModelSpec,
    PairedSample,
    VectorModelSpec,
    build_conditional_mean_plan,
    compute_moments,
    cond_mean_given_xu,
    cond_mean_given_z,
    estimate_mu_c,
    estimate_mu_fo,
    estimate_mu_tot,
    estimate_sigma_tot,
    estimate_sigma_tot_h0,
    evaluate_g,
    normal_marginal,
    sample_paired,
    substream,
    vector_model_af_sampler,
)
from kbsens import estimators
from kbsens.estimators import compute_af_arrays, moments_from_arrays


def first_coordinate_model():
    return ModelSpec(name="first", dim_in=2, dim_out=1, evaluate=lambda X: X[:, 0])


def constant_model(value=3.0, d=2):
    return ModelSpec(
        name="const", dim_in=d, dim_out=1, evaluate=lambda X: np.full(X.shape[0], value)
    )


def normal_inputs(d=2):
    return InputModel(marginals=(normal_marginal(),) * d)


def hand_setup():
    """Two outer rows and a two-point frozen inner sample, all hand-picked.

    The model returns its first coordinate, so every effect block is exactly
    computable: residuals [0, 1] paired with [7, 2].
    """
    model = first_coordinate_model()
    im = normal_inputs(2)
    plan = ConditionalMeanPlan(
        u=(0,),
        inner_x=np.array([[0.0], [0.0]]),
        inner_z=np.array([[0.5], [-0.5]]),
        global_mean=np.array([0.0]),
        seed=0,
    )
    sample = PairedSample(
        u=(0,),
        x_u=np.array([[0.0], [1.0]]),
        z=np.array([[0.3], [-0.7]]),
        x_u_prime=np.array([[7.0], [2.0]]),
        z_prime=np.array([[0.1], [0.9]]),
        seed=0,
    )
    return model, im, plan, sample


class TestPlanConstruction:
    def test_global_mean_definition(self):
        spec = VectorModelSpec(interaction=2.0, rho=0.4)
        model, im = spec.model(), spec.input_model()
        plan = build_conditional_mean_plan(model, im, (0,), m1=64, seed=5)
        recomputed = evaluate_g(model, im, (0,), plan.inner_x, plan.inner_z).mean(axis=0)
        np.testing.assert_array_equal(plan.global_mean, recomputed)

    def test_shapes_and_m1(self):
        spec = GFunctionSpec()
        plan = build_conditional_mean_plan(spec.model(), spec.input_model(), (2,), 32, seed=1)
        assert plan.m1 == 32
        assert plan.inner_x.shape == (32, 1)
        assert plan.inner_z.shape == (32, 9)
        assert plan.global_mean.shape == (1,)

    def test_deterministic(self):
        spec = GFunctionSpec()
        a = build_conditional_mean_plan(spec.model(), spec.input_model(), (0,), 16, seed=9)
        b = build_conditional_mean_plan(spec.model(), spec.input_model(), (0,), 16, seed=9)
        np.testing.assert_array_equal(a.inner_x, b.inner_x)
        np.testing.assert_array_equal(a.inner_z, b.inner_z)
        np.testing.assert_array_equal(a.global_mean, b.global_mean)

    def test_m1_validated(self):
        spec = GFunctionSpec()
        with pytest.raises(ValueError, match="m1"):
            build_conditional_mean_plan(spec.model(), spec.input_model(), (0,), 0, seed=0)


class TestConditionalMeans:
    def test_constant_in_subset_returns_exact_values(self):
        # the model ignores x_u entirely; with a power-of-two inner size the
        # averaged identical values reproduce g(z) without rounding
        model = ModelSpec(name="second", dim_in=2, dim_out=1, evaluate=lambda X: X[:, 1] ** 2)
        im = normal_inputs(2)
        plan = build_conditional_mean_plan(model, im, (0,), m1=16, seed=3)
        z_rows = np.array([[0.3], [-1.1], [2.0]])
        out = cond_mean_given_z(model, im, (0,), plan, z_rows)
        np.testing.assert_array_equal(out, z_rows**2)

    def test_single_inner_point(self):
        model = first_coordinate_model()
        im = normal_inputs(2)
        plan = build_conditional_mean_plan(model, im, (0,), m1=1, seed=4)
        z_rows = np.array([[0.0], [1.0]])
        out = cond_mean_given_z(model, im, (0,), plan, z_rows)
        np.testing.assert_array_equal(out, np.full((2, 1), plan.inner_x[0, 0]))

    def test_vector_model_conditional_mean_given_innovation(self):
        spec = VectorModelSpec(interaction=2.0, rho=0.0)
        model, im = spec.model(), spec.input_model()
        plan = build_conditional_mean_plan(model, im, (0,), m1=100_000, seed=6)
        z_rows = np.array([[0.7], [-0.4], [1.5]])
        out = cond_mean_given_z(model, im, (0,), plan, z_rows)
        z = z_rows[:, 0]
        expected = np.column_stack([z, 1.0 + math.sqrt(2.0) * z])
        np.testing.assert_allclose(out, expected, atol=0.05)

    def test_multiplicative_benchmark_conditional_mean_given_input(self):
        spec = GFunctionSpec()
        model, im = spec.model(), spec.input_model()
        plan = build_conditional_mean_plan(model, im, (0,), m1=100_000, seed=7)
        out = cond_mean_given_xu(model, im, (0,), plan, np.array([[0.0], [0.5]]))
        np.testing.assert_allclose(out[:, 0], [2.0, 0.0], atol=0.02)

    def test_rows_must_be_two_dimensional(self):
        model, im, plan, _ = hand_setup()
        with pytest.raises(ValueError, match="2-D"):
            cond_mean_given_z(model, im, (0,), plan, np.zeros(3))
        with pytest.raises(ValueError, match="2-D"):
            cond_mean_given_xu(model, im, (0,), plan, np.zeros(3))

    def test_frozen_plan_is_deterministic(self):
        spec = VectorModelSpec()
        model, im = spec.model(), spec.input_model()
        plan = build_conditional_mean_plan(model, im, (0,), m1=50, seed=8)
        rows = substream(8, 99).standard_normal((20, 1))
        a = cond_mean_given_z(model, im, (0,), plan, rows)
        b = cond_mean_given_z(model, im, (0,), plan, rows)
        np.testing.assert_array_equal(a, b)

    def test_chunked_evaluation_matches_single_chunk(self, monkeypatch):
        spec = VectorModelSpec(interaction=1.5, rho=0.25)
        model, im = spec.model(), spec.input_model()
        plan = build_conditional_mean_plan(model, im, (0,), m1=17, seed=10)
        rows = substream(10, 99).standard_normal((23, 1))
        whole = cond_mean_given_z(model, im, (0,), plan, rows)
        monkeypatch.setattr(estimators, "_CHUNK_ELEMS", 64)
        pieces = cond_mean_given_z(model, im, (0,), plan, rows)
        np.testing.assert_array_equal(whole, pieces)

    def test_fresh_inner_draws_are_reproducible(self):
        spec = VectorModelSpec()
        model, im = spec.model(), spec.input_model()
        frozen = build_conditional_mean_plan(model, im, (0,), 500, seed=11)
        fresh = build_conditional_mean_plan(model, im, (0,), 500, seed=11, fresh_inner=True)
        rows = substream(11, 99).standard_normal((10, 1))
        a = cond_mean_given_z(model, im, (0,), fresh, rows)
        b = cond_mean_given_z(model, im, (0,), fresh, rows)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, cond_mean_given_z(model, im, (0,), frozen, rows))
        np.testing.assert_allclose(a, cond_mean_given_z(model, im, (0,), frozen, rows), atol=0.3)


class TestHandComputedMoments:
    def test_mu_tot(self):
        model, im, plan, sample = hand_setup()
        k = KernelSpec(family="quadratic")
        # residuals [0, 1] vs [7, 2] -> terms [0, 4]
        assert estimate_mu_tot(model, im, (0,), k, sample, plan) == 2.0

    def test_sigma_tot(self):
        model, im, plan, sample = hand_setup()
        k = KernelSpec(family="quadratic")
        assert estimate_sigma_tot(model, im, (0,), k, sample, plan) == 8.0

    def test_sigma_tot_h0(self):
        model, im, plan, sample = hand_setup()
        k = KernelSpec(family="quadratic")
        assert estimate_sigma_tot_h0(model, im, (0,), k, sample, plan) == 8.0

    def test_mu_fo(self):
        model, im, plan, sample = hand_setup()
        k = KernelSpec(family="quadratic")
        assert estimate_mu_fo(model, im, (0,), k, sample, plan) == 2.0

    def test_mu_c(self):
        model, im, plan, sample = hand_setup()
        k = KernelSpec(family="quadratic")
        assert estimate_mu_c(model, im, (0,), k, sample, plan) == 2.0

    def test_gaussian_terms(self):
        model, im, plan, sample = hand_setup()
        k = KernelSpec(family="gaussian", alpha=1.0)
        expected = 0.5 * (math.exp(-49.0) + math.exp(-1.0))
        assert estimate_mu_tot(model, im, (0,), k, sample, plan) == pytest.approx(
            expected, rel=1e-15
        )

    def test_first_rows_only(self):
        model, im, plan, sample = hand_setup()
        k = KernelSpec(family="quadratic")
        assert estimate_mu_tot(model, im, (0,), k, sample, plan, m=1) == 0.0
        assert estimate_sigma_tot(model, im, (0,), k, sample, plan, m=1) == 0.0

    def test_m_validation(self):
        model, im, plan, sample = hand_setup()
        k = KernelSpec(family="quadratic")
        with pytest.raises(ValueError, match=r"\[1, sample.size\]"):
            estimate_mu_tot(model, im, (0,), k, sample, plan, m=3)
        with pytest.raises(ValueError, match=r"\[1, sample.size\]"):
            estimate_mu_fo(model, im, (0,), k, sample, plan, m=0)

    def test_moments_bundle_matches_thin_ops(self):
        model, im, plan, sample = hand_setup()
        k = KernelSpec(family="quadratic")
        mom = compute_moments(model, im, (0,), k, sample, plan)
        assert mom.mu_tot == 2.0
        assert mom.sigma_tot == 8.0
        assert mom.sigma_tot_h0 == 8.0
        assert mom.mu_fo == 2.0
        assert mom.mu_c == 2.0
        assert mom.sigma_fo == 8.0
        assert mom.k_origin == 0.0
        assert (mom.m, mom.m1, mom.n_norm) == (2, 2, 2)


class TestEffectArrays:
    def test_shapes_and_normalizing_split(self):
        spec = VectorModelSpec()
        model, im = spec.model(), spec.input_model()
        sample = sample_paired(im, (0,), 40, seed=12)
        plan = build_conditional_mean_plan(model, im, (0,), 8, seed=12)
        arrays = compute_af_arrays(model, im, (0,), sample, plan, m=10)
        assert arrays.tot_left.shape == (10, 2)
        assert arrays.fo_right.shape == (10, 2)
        assert arrays.c_left.shape == (40, 2)
        assert arrays.m == 10

    def test_blocks_match_their_definitions(self):
        spec = VectorModelSpec(interaction=2.0, rho=0.3)
        model, im = spec.model(), spec.input_model()
        sample = sample_paired(im, (0,), 15, seed=13)
        plan = build_conditional_mean_plan(model, im, (0,), 16, seed=13)
        arrays = compute_af_arrays(model, im, (0,), sample, plan)
        gy = evaluate_g(model, im, (0,), sample.x_u, sample.z)
        cmz = cond_mean_given_z(model, im, (0,), plan, sample.z)
        np.testing.assert_array_equal(arrays.tot_left, gy - cmz)
        cmx = cond_mean_given_xu(model, im, (0,), plan, sample.x_u)
        np.testing.assert_array_equal(arrays.fo_left, cmx - plan.global_mean)
        np.testing.assert_array_equal(arrays.c_left, gy - plan.global_mean)

    def test_m_range_validated(self):
        spec = VectorModelSpec()
        model, im = spec.model(), spec.input_model()
        sample = sample_paired(im, (0,), 5, seed=14)
        plan = build_conditional_mean_plan(model, im, (0,), 4, seed=14)
        with pytest.raises(ValueError, match=r"\[1, sample.size\]"):
            compute_af_arrays(model, im, (0,), sample, plan, m=6)


class TestStructuralZeros:
    def test_inert_input_moments_vanish_exactly(self):
        # an input the model never reads: with a power-of-two inner size the
        # plug-in residuals are exactly zero, so every total-effect moment is
        # exactly zero (no asymptotics involved)
        spec = GFunctionSpec(dummy_inputs=1)
        model, im = spec.model(), spec.input_model()
        u = (10,)
        sample = sample_paired(im, u, 8, seed=15)
        plan = build_conditional_mean_plan(model, im, u, 16, seed=15)
        k = KernelSpec(family="quadratic")
        assert estimate_mu_tot(model, im, u, k, sample, plan) == 0.0
        assert estimate_sigma_tot(model, im, u, k, sample, plan) == 0.0
        assert estimate_sigma_tot_h0(model, im, u, k, sample, plan) == 0.0
        assert estimate_mu_fo(model, im, u, k, sample, plan) == 0.0

    def test_inert_input_with_general_inner_size_leaves_rounding_dust(self):
        spec = GFunctionSpec(dummy_inputs=1)
        model, im = spec.model(), spec.input_model()
        u = (10,)
        sample = sample_paired(im, u, 8, seed=16)
        plan = build_conditional_mean_plan(model, im, u, 200, seed=16)
        k = KernelSpec(family="quadratic")
        assert abs(estimate_mu_tot(model, im, u, k, sample, plan)) <= 1e-55

    def test_constant_output_moments(self):
        model = constant_model(3.0)
        im = normal_inputs(2)
        sample = sample_paired(im, (0,), 10, seed=17)
        plan = build_conditional_mean_plan(model, im, (0,), 7, seed=17)
        kq = KernelSpec(family="quadratic")
        kg = KernelSpec(family="gaussian", alpha=1.0)
        assert estimate_mu_c(model, im, (0,), kq, sample, plan) == 0.0
        assert estimate_mu_c(model, im, (0,), kg, sample, plan) == 1.0
        assert estimate_mu_tot(model, im, (0,), kg, sample, plan) == 1.0
        assert estimate_sigma_tot_h0(model, im, (0,), kg, sample, plan) == 0.0


class TestMonteCarloTargets:
    def test_mu_fo_additive_model(self):
        # M = X1 + X2 with standard normal inputs: the first-order effect of
        # X1 is X1 itself, so the quadratic moment tends to E[X^2]^2 = 1
        model = ModelSpec(name="sum", dim_in=2, dim_out=1, evaluate=lambda X: X.sum(axis=1))
        im = normal_inputs(2)
        sample = sample_paired(im, (0,), 4000, seed=18)
        plan = build_conditional_mean_plan(model, im, (0,), 2000, seed=18)
        k = KernelSpec(family="quadratic")
        assert estimate_mu_fo(model, im, (0,), k, sample, plan) == pytest.approx(1.0, abs=0.2)

    def test_mu_c_multiplicative_benchmark(self):
        spec = GFunctionSpec()
        model, im = spec.model(), spec.input_model()
        sample = sample_paired(im, (0,), 4000, seed=19)
        plan = build_conditional_mean_plan(model, im, (0,), 2000, seed=19)
        k = KernelSpec(family="quadratic")
        variance = 0.8633599564378641
        assert estimate_mu_c(model, im, (0,), k, sample, plan) == pytest.approx(
            variance**2, abs=0.15
        )

    def test_mu_c_identity_model_l1(self):
        model = first_coordinate_model()
        im = normal_inputs(2)
        sample = sample_paired(im, (0,), 4000, seed=20)
        plan = build_conditional_mean_plan(model, im, (0,), 2000, seed=20)
        k = KernelSpec(family="l1_product")
        assert estimate_mu_c(model, im, (0,), k, sample, plan) == pytest.approx(
            2.0 / math.pi, abs=0.05
        )

    def test_mu_tot_vector_model_oracle(self):
        # closed-form target at rho=0, interaction=2: 29.0
        spec = VectorModelSpec(interaction=2.0, rho=0.0)
        model, im = spec.model(), spec.input_model()
        sample = sample_paired(im, (0,), 4000, seed=21)
        plan = build_conditional_mean_plan(model, im, (0,), 2000, seed=21)
        k = KernelSpec(family="quadratic")
        est = estimate_mu_tot(model, im, (0,), k, sample, plan)
        assert est == pytest.approx(29.0, abs=4.0)

    def test_variance_estimator_tracks_sampling_noise(self):
        # the estimated per-term variance must match the observed scatter of
        # sqrt(m) * (estimate - oracle) across independent replications
        spec = VectorModelSpec(interaction=2.0, rho=0.0)
        model, im = spec.model(), spec.input_model()
        k = KernelSpec(family="quadratic")
        m = 500
        mu_hats = []
        sigma_hats = []
        for rep in range(30):
            sample = sample_paired(im, (0,), m, seed=1000 + rep)
            plan = build_conditional_mean_plan(model, im, (0,), 2000, seed=1000 + rep)
            mom = compute_moments(model, im, (0,), k, sample, plan)
            mu_hats.append(mom.mu_tot)
            sigma_hats.append(mom.sigma_tot)
        assert min(sigma_hats) >= 0.0
        observed = m * np.var(np.asarray(mu_hats) - 29.0)
        predicted = float(np.mean(sigma_hats))
        assert 0.5 * predicted <= observed <= 2.0 * predicted


class TestSymmetryAndAccounting:
    def test_swapping_paired_blocks_changes_nothing(self):
        spec = VectorModelSpec(interaction=2.0, rho=0.5)
        model, im = spec.model(), spec.input_model()
        sample = sample_paired(im, (0,), 64, seed=22)
        swapped = PairedSample(
            u=sample.u,
            x_u=sample.x_u_prime,
            z=sample.z_prime,
            x_u_prime=sample.x_u,
            z_prime=sample.z,
            seed=sample.seed,
        )
        plan = build_conditional_mean_plan(model, im, (0,), 32, seed=22)
        for k in (KernelSpec(family="quadratic"), KernelSpec(family="gaussian", alpha=0.2)):
            a = compute_moments(model, im, (0,), k, sample, plan)
            b = compute_moments(model, im, (0,), k, swapped, plan)
            assert a.mu_tot == b.mu_tot
            assert a.sigma_tot == b.sigma_tot
            assert a.mu_fo == b.mu_fo
            assert a.mu_c == b.mu_c

    def test_model_evaluation_count(self):
        calls = {"rows": 0}

        def counted(X):
            calls["rows"] += X.shape[0]
            return X[:, 0]

        model = ModelSpec(name="count", dim_in=2, dim_out=1, evaluate=counted)
        im = normal_inputs(2)
        m1, m, n_norm = 13, 9, 21
        sample = sample_paired(im, (0,), n_norm, seed=23)
        plan = build_conditional_mean_plan(model, im, (0,), m1, seed=23)
        assert calls["rows"] == m1
        calls["rows"] = 0
        compute_af_arrays(model, im, (0,), sample, plan, m=m)
        assert calls["rows"] == 2 * n_norm + 4 * m * m1

    def test_pipeline_entry_points_agree(self):
        spec = VectorModelSpec()
        model, im = spec.model(), spec.input_model()
        sample = sample_paired(im, (0,), 30, seed=24)
        plan = build_conditional_mean_plan(model, im, (0,), 16, seed=24)
        k = KernelSpec(family="gaussian", alpha=0.1)
        bundle = compute_moments(model, im, (0,), k, sample, plan)
        arrays = compute_af_arrays(model, im, (0,), sample, plan)
        direct = moments_from_arrays(k, arrays)
        assert bundle == direct

    def test_oracle_sampler_agrees_with_nested_pipeline(self):
        # the nested estimator and the closed-form effect sampler must land
        # on the same moment for the same population quantity
        spec = VectorModelSpec(interaction=2.0, rho=0.0)
        model, im = spec.model(), spec.input_model()
        k = KernelSpec(family="quadratic")
        sample = sample_paired(im, (0,), 4000, seed=25)
        plan = build_conditional_mean_plan(model, im, (0,), 2000, seed=25)
        nested = estimate_mu_tot(model, im, (0,), k, sample, plan)
        draw = vector_model_af_sampler(spec, (0,), "total")
        left, right = draw(substream(25, 0), 200_000)
        from kbsens import pair_values

        direct = float(pair_values(k, left, right).mean())
        assert nested == pytest.approx(direct, abs=4.0)
