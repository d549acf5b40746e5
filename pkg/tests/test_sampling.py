"""Input models, dependency maps, paired sampling and model composition."""

import math

import numpy as np
import pytest

from kbsens import (
    InputModel,
    Marginal,
    ModelSpec,
    child_seed,
    evaluate_g,
    gaussian_pair_dependency,
    normal_marginal,
    sample_paired,
    substream,
    uniform_marginal,
)
from kbsens.models import GFunctionSpec, VectorModelSpec
from kbsens.sampling import PASSTHROUGH, complement


def standard_normal_inputs(d):
    return InputModel(marginals=(normal_marginal(),) * d)


class TestSubstreams:
    def test_substream_is_deterministic(self):
        a = substream(42, 3).standard_normal(8)
        b = substream(42, 3).standard_normal(8)
        np.testing.assert_array_equal(a, b)

    def test_distinct_tags_give_distinct_streams(self):
        a = substream(42, 3).standard_normal(8)
        b = substream(42, 4).standard_normal(8)
        c = substream(43, 3).standard_normal(8)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_multi_level_tags(self):
        a = substream(0, 1, 2).standard_normal(4)
        b = substream(0, 1, 3).standard_normal(4)
        assert not np.array_equal(a, b)

    def test_child_seed_is_deterministic(self):
        assert child_seed(7, 1, 2) == child_seed(7, 1, 2)
        assert child_seed(7, 1, 2) != child_seed(7, 1, 3)
        assert child_seed(7, 1) != child_seed(8, 1)

    def test_child_seed_is_nonnegative_int(self):
        s = child_seed(0, 100, 5)
        assert isinstance(s, int)
        assert s >= 0


class TestMarginals:
    def test_uniform_bounds(self):
        m = uniform_marginal(-1.0, 3.0)
        draws = m.sample(substream(1, 0), 10_000)
        assert draws.min() >= -1.0
        assert draws.max() <= 3.0
        assert m.name == "uniform(-1,3)"

    def test_uniform_validation(self):
        with pytest.raises(ValueError, match="high > low"):
            uniform_marginal(1.0, 1.0)

    def test_normal_moments(self):
        m = normal_marginal(2.0, 0.5)
        draws = m.sample(substream(2, 0), 100_000)
        assert draws.mean() == pytest.approx(2.0, abs=0.01)
        assert draws.std() == pytest.approx(0.5, abs=0.01)

    def test_normal_validation(self):
        with pytest.raises(ValueError, match="sd > 0"):
            normal_marginal(0.0, 0.0)


class TestDependencyMaps:
    def test_zero_correlation_returns_innovation(self):
        dep = gaussian_pair_dependency(0.0)
        x = np.array([[1.1]])
        z = np.array([[0.3]])
        np.testing.assert_array_equal(dep.transform(x, z), z)

    def test_full_correlation_returns_tested_value(self):
        dep = gaussian_pair_dependency(1.0)
        x = np.array([[3.7]])
        z = np.array([[-2.0]])
        np.testing.assert_array_equal(dep.transform(x, z), x)

    def test_half_correlation_value(self):
        dep = gaussian_pair_dependency(0.5)
        out = dep.transform(np.array([[1.0]]), np.array([[0.0]]))
        assert out[0, 0] == 0.5

    def test_conditional_formula(self):
        rho = -0.75
        dep = gaussian_pair_dependency(rho)
        x = np.array([[2.0]])
        z = np.array([[1.0]])
        expected = rho * 2.0 + math.sqrt(1.0 - rho * rho) * 1.0
        assert dep.transform(x, z)[0, 0] == pytest.approx(expected, rel=1e-15)

    def test_correlation_range_validation(self):
        with pytest.raises(ValueError, match=r"\[-1, 1\]"):
            gaussian_pair_dependency(1.5)

    def test_pair_width_validation(self):
        dep = gaussian_pair_dependency(0.5)
        with pytest.raises(ValueError, match="exactly 2"):
            dep.transform(np.zeros((4, 2)), np.zeros((4, 1)))

    def test_reconstructed_marginal_is_standard_normal(self):
        n = 100_000
        dep = gaussian_pair_dependency(0.5)
        rng = substream(5, 0)
        x = rng.standard_normal((n, 1))
        z = substream(5, 1).standard_normal((n, 1))
        other = dep.transform(x, z)[:, 0]
        assert abs(other.mean()) <= 3.0 / math.sqrt(n)
        assert other.var() == pytest.approx(1.0, abs=0.05)

    def test_joint_covariance(self):
        n = 100_000
        rho = 0.5
        dep = gaussian_pair_dependency(rho)
        x = substream(6, 0).standard_normal((n, 1))
        z = substream(6, 1).standard_normal((n, 1))
        other = dep.transform(x, z)
        cov = np.cov(np.column_stack([x, other]).T)
        np.testing.assert_allclose(cov, [[1.0, rho], [rho, 1.0]], atol=0.05)


class TestInputModel:
    def test_dimension(self):
        assert standard_normal_inputs(4).dimension == 4

    def test_needs_marginals(self):
        with pytest.raises(ValueError, match="at least one"):
            InputModel(marginals=())

    def test_dependency_lookup_defaults_to_passthrough(self):
        im = standard_normal_inputs(3)
        assert im.dependency_for((0,)) is PASSTHROUGH

    def test_registered_dependency_is_returned(self):
        dep = gaussian_pair_dependency(0.3)
        im = InputModel(
            marginals=(normal_marginal(), normal_marginal()),
            dependencies={(0,): dep},
        )
        assert im.dependency_for((0,)) is dep
        assert im.dependency_for((1,)) is PASSTHROUGH

    def test_dependency_subsets_validated(self):
        with pytest.raises(ValueError, match="out of range"):
            InputModel(
                marginals=(normal_marginal(),),
                dependencies={(2,): gaussian_pair_dependency(0.1)},
            )


class TestComplement:
    def test_values(self):
        assert complement((0,), 4) == (1, 2, 3)
        assert complement((1, 3), 4) == (0, 2)
        assert complement((0, 1, 2, 3), 4) == ()


class TestSamplePaired:
    def test_shapes(self):
        im = GFunctionSpec().input_model()
        s = sample_paired(im, (0,), 1000, seed=0)
        assert s.x_u.shape == (1000, 1)
        assert s.z.shape == (1000, 9)
        assert s.x_u_prime.shape == (1000, 1)
        assert s.z_prime.shape == (1000, 9)
        assert s.size == 1000
        assert s.u == (0,)

    def test_multi_coordinate_subset(self):
        im = GFunctionSpec().input_model()
        s = sample_paired(im, (0, 2), 50, seed=1)
        assert s.x_u.shape == (50, 2)
        assert s.z.shape == (50, 8)

    def test_repeat_is_bit_identical(self):
        im = standard_normal_inputs(3)
        a = sample_paired(im, (1,), 200, seed=9)
        b = sample_paired(im, (1,), 200, seed=9)
        np.testing.assert_array_equal(a.x_u, b.x_u)
        np.testing.assert_array_equal(a.z, b.z)
        np.testing.assert_array_equal(a.x_u_prime, b.x_u_prime)
        np.testing.assert_array_equal(a.z_prime, b.z_prime)

    def test_blocks_are_mutually_distinct(self):
        im = standard_normal_inputs(2)
        s = sample_paired(im, (0,), 100, seed=3)
        assert not np.array_equal(s.x_u, s.x_u_prime)
        assert not np.array_equal(s.z, s.z_prime)
        assert not np.array_equal(s.x_u[:, 0], s.z[:, 0])

    def test_column_moments(self):
        im = standard_normal_inputs(2)
        s = sample_paired(im, (0,), 100_000, seed=4)
        for block in (s.x_u, s.z, s.x_u_prime, s.z_prime):
            assert abs(block[:, 0].mean()) <= 0.02
            assert block[:, 0].var() == pytest.approx(1.0, abs=0.03)

    def test_empty_subset_rejected(self):
        im = standard_normal_inputs(2)
        with pytest.raises(ValueError, match="non-empty"):
            sample_paired(im, (), 10, seed=0)

    def test_unsorted_subset_rejected(self):
        im = standard_normal_inputs(3)
        with pytest.raises(ValueError, match="sorted"):
            sample_paired(im, (2, 0), 10, seed=0)

    def test_out_of_range_subset_rejected(self):
        im = standard_normal_inputs(3)
        with pytest.raises(ValueError, match="out of range"):
            sample_paired(im, (3,), 10, seed=0)

    def test_size_validated(self):
        im = standard_normal_inputs(2)
        with pytest.raises(ValueError, match="size"):
            sample_paired(im, (0,), 0, seed=0)


class TestModelSpec:
    def test_dimension_validation(self):
        with pytest.raises(ValueError, match=">= 1"):
            ModelSpec(name="bad", dim_in=0, dim_out=1, evaluate=lambda X: X)

    def test_flat_output_normalized(self):
        m = ModelSpec(name="sum", dim_in=2, dim_out=1, evaluate=lambda X: X.sum(axis=1))
        out = m.evaluate_batch(np.ones((3, 2)))
        assert out.shape == (3, 1)
        np.testing.assert_array_equal(out[:, 0], [2.0, 2.0, 2.0])

    def test_flat_output_with_vector_model_rejected(self):
        m = ModelSpec(name="bad", dim_in=2, dim_out=2, evaluate=lambda X: X.sum(axis=1))
        with pytest.raises(ValueError, match="flat output"):
            m.evaluate_batch(np.ones((3, 2)))

    def test_wrong_input_width_rejected(self):
        m = ModelSpec(name="sum", dim_in=2, dim_out=1, evaluate=lambda X: X.sum(axis=1))
        with pytest.raises(ValueError, match="expected"):
            m.evaluate_batch(np.ones((3, 5)))

    def test_row_wise_callable(self):
        m = ModelSpec(
            name="rowsum",
            dim_in=2,
            dim_out=1,
            evaluate=lambda row: float(row[0] + row[1]),
            vectorized=False,
        )
        out = m.evaluate_batch(np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_array_equal(out, [[3.0], [7.0]])


class TestEvaluateG:
    def test_vector_model_point(self):
        spec = VectorModelSpec(interaction=2.0, rho=0.0)
        out = evaluate_g(
            spec.model(),
            spec.input_model(),
            (0,),
            np.array([[1.0]]),
            np.array([[1.0]]),
        )
        np.testing.assert_allclose(out, [[4.0, 1.0 + math.sqrt(2.0)]], rtol=1e-15)

    def test_multiplicative_benchmark_zero_factor(self):
        spec = GFunctionSpec()
        out = evaluate_g(
            spec.model(),
            spec.input_model(),
            (0, 1),
            np.array([[0.5, 0.5]]),
            np.full((1, 8), 0.25),
        )
        assert out[0, 0] == 0.0

    def test_coordinates_scatter_to_right_columns(self):
        seen = {}

        def capture(X):
            seen["X"] = X.copy()
            return np.zeros(X.shape[0])

        model = ModelSpec(name="probe", dim_in=4, dim_out=1, evaluate=capture)
        im = standard_normal_inputs(4)
        x_u = np.array([[10.0, 20.0], [30.0, 40.0]])
        z = np.array([[1.0, 2.0], [3.0, 4.0]])
        evaluate_g(model, im, (1, 3), x_u, z)
        X = seen["X"]
        np.testing.assert_array_equal(X[:, [1, 3]], x_u)
        np.testing.assert_array_equal(X[:, [0, 2]], z)

    def test_dependency_map_applied_to_complement(self):
        rho = 0.5
        spec = VectorModelSpec(interaction=0.0, rho=rho)
        seen = {}

        def capture(X):
            seen["X"] = X.copy()
            return np.zeros((X.shape[0], 2))

        model = ModelSpec(name="probe", dim_in=2, dim_out=2, evaluate=capture)
        x = np.array([[1.0], [2.0]])
        z = np.array([[0.0], [1.0]])
        evaluate_g(model, spec.input_model(), (0,), x, z)
        comp = math.sqrt(1.0 - rho * rho)
        expected = rho * x + comp * z
        np.testing.assert_allclose(seen["X"][:, [1]], expected, rtol=1e-15)
        np.testing.assert_array_equal(seen["X"][:, [0]], x)

    def test_shape_validation(self):
        spec = VectorModelSpec()
        with pytest.raises(ValueError, match="x_u must be"):
            evaluate_g(spec.model(), spec.input_model(), (0,), np.zeros((2, 2)), np.zeros((2, 1)))
        with pytest.raises(ValueError, match="z must be"):
            evaluate_g(spec.model(), spec.input_model(), (0,), np.zeros((2, 1)), np.zeros((2, 2)))
        with pytest.raises(ValueError, match="same number of rows"):
            evaluate_g(spec.model(), spec.input_model(), (0,), np.zeros((2, 1)), np.zeros((3, 1)))

    def test_model_and_input_dimensions_must_agree(self):
        spec = VectorModelSpec()
        with pytest.raises(ValueError, match="inputs"):
            evaluate_g(spec.model(), standard_normal_inputs(3), (0,), np.zeros((2, 1)), np.zeros((2, 2)))

    def test_non_finite_output_rejected(self):
        model = ModelSpec(
            name="blowup",
            dim_in=2,
            dim_out=1,
            evaluate=lambda X: np.full(X.shape[0], np.inf),
        )
        im = standard_normal_inputs(2)
        with pytest.raises(ValueError, match="non-finite"):
            evaluate_g(model, im, (0,), np.zeros((2, 1)), np.zeros((2, 1)))
