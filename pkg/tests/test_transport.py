"""Tests for affine triangular map construction, estimation, and inversion."""

import math

import numpy as np
import pytest

from transportfilter.errors import (
    DimensionError,
    EstimationError,
    NonMonotoneMapError,
)
from transportfilter.transport import (
    AffineTriangularMap,
    MapComponent,
    SolverOptions,
    closed_form_gaussian_map,
    component_gradient,
    component_objective,
    estimate_component,
    estimate_map,
    evaluate,
    evaluate_lower_block,
    identity_component,
    invert_lower_block,
    prior_to_posterior,
)

from oracles import finite_difference_gradient, grid_minimize_affine_1d, kalman_posterior

GRADIENT = SolverOptions(method="gradient")


def identity_map(dim, obs_block_size=0):
    comps = tuple(identity_component(k) for k in range(1, dim + 1))
    return AffineTriangularMap(dim, comps, obs_block_size)


class TestTypes:
    def test_component_weight_count_enforced(self):
        with pytest.raises(DimensionError):
            MapComponent(2, 0.0, [1.0])

    def test_map_rejects_nonpositive_diagonal(self):
        comps = (MapComponent(1, 0.0, [1.0]), MapComponent(2, 0.0, [1.0, -0.5]))
        with pytest.raises(NonMonotoneMapError):
            AffineTriangularMap(2, comps)

    def test_map_rejects_wrong_component_count(self):
        with pytest.raises(DimensionError):
            AffineTriangularMap(2, (identity_component(1),))


class TestEvaluate:
    def test_identity_map(self):
        m = identity_map(2)
        np.testing.assert_allclose(evaluate(m, [0.5, -1.0]), [0.5, -1.0])

    def test_one_dimensional_substitution(self):
        m = AffineTriangularMap(1, (MapComponent(1, 1.0, [2.0]),))
        np.testing.assert_allclose(evaluate(m, [2.0]), [5.0])

    def test_two_dimensional_substitution(self):
        comps = (MapComponent(1, 0.0, [1.0]), MapComponent(2, 1.0, [3.0, 2.0]))
        m = AffineTriangularMap(2, comps)
        np.testing.assert_allclose(evaluate(m, [1.0, 1.0]), [1.0, 6.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            evaluate(identity_map(2), [1.0, 2.0, 3.0])

    def test_triangularity(self):
        """Perturbing input l > k never changes output k."""
        rng = np.random.default_rng(7)
        z = rng.standard_normal((400, 5))
        m = closed_form_gaussian_map(z)
        point = rng.standard_normal(5)
        base = evaluate(m, point)
        for k in range(5):
            perturbed = point.copy()
            perturbed[k + 1 :] += rng.standard_normal(4 - k)
            np.testing.assert_allclose(evaluate(m, perturbed)[: k + 1], base[: k + 1])


class TestInvertLowerBlock:
    def test_round_trip_random_map(self):
        rng = np.random.default_rng(3)
        samples = rng.standard_normal((200, 5)) @ rng.standard_normal((5, 5))
        m = closed_form_gaussian_map(samples, obs_block_size=2)
        y_star = rng.standard_normal(2)
        x = rng.standard_normal(3)
        r = evaluate_lower_block(m, np.concatenate([y_star, x]))
        recovered = invert_lower_block(m, y_star, r)
        np.testing.assert_allclose(recovered, x, rtol=1e-10, atol=1e-12)

    def test_scalar_block(self):
        # solve 1 + 2 x = 5
        m = AffineTriangularMap(1, (MapComponent(1, 1.0, [2.0]),), obs_block_size=0)
        np.testing.assert_allclose(invert_lower_block(m, [], [5.0]), [2.0])

    def test_observation_dependence(self):
        # solve y + x = 5 at y* = 3
        comps = (identity_component(1), MapComponent(2, 0.0, [1.0, 1.0]))
        m = AffineTriangularMap(2, comps, obs_block_size=1)
        np.testing.assert_allclose(invert_lower_block(m, [3.0], [5.0]), [2.0])

    def test_batch_round_trip(self):
        rng = np.random.default_rng(11)
        samples = rng.standard_normal((300, 4))
        m = closed_form_gaussian_map(samples, obs_block_size=1)
        y_star = np.array([0.3])
        xs = rng.standard_normal((50, 3))
        joint = np.column_stack([np.full(50, y_star), xs])
        rs = evaluate_lower_block(m, joint)
        np.testing.assert_allclose(invert_lower_block(m, y_star, rs), xs, rtol=1e-10)


class TestComponentObjective:
    def test_zero_sample_unit_slope(self):
        comp = MapComponent(1, 0.0, [1.0])
        assert component_objective(comp, np.array([[0.0]])) == pytest.approx(0.0)

    def test_direct_substitution(self):
        comp = MapComponent(1, 0.0, [2.0])
        expected = 2.0 - math.log(2.0)
        assert component_objective(comp, np.array([[1.0]])) == pytest.approx(expected)

    def test_two_samples(self):
        comp = MapComponent(1, 0.0, [1.0])
        assert component_objective(comp, np.array([[1.0], [-1.0]])) == pytest.approx(0.5)

    def test_nonpositive_diagonal_is_infinite(self):
        comp = MapComponent(1, 0.0, [0.0])
        assert component_objective(comp, np.array([[1.0]])) == math.inf


class TestComponentGradient:
    def test_stationary_point(self):
        comp = MapComponent(1, 0.0, [1.0])
        grad = component_gradient(comp, np.array([[1.0], [-1.0]]))
        np.testing.assert_allclose(grad, [0.0, 0.0], atol=1e-15)

    def test_direct_substitution(self):
        comp = MapComponent(1, 1.0, [1.0])
        grad = component_gradient(comp, np.array([[0.0]]))
        np.testing.assert_allclose(grad, [1.0, -1.0])

    def test_matches_finite_differences(self):
        """Analytic gradient vs. central differences with step 1e-5."""
        rng = np.random.default_rng(21)
        for _ in range(25):
            k = int(rng.integers(1, 6))
            m = int(rng.integers(k + 2, 40))
            samples = rng.standard_normal((m, k)) * rng.uniform(0.5, 2.0)
            comp = MapComponent(
                k, rng.normal(), np.concatenate([rng.normal(size=k - 1), [rng.uniform(0.3, 2.0)]])
            )
            grad = component_gradient(comp, samples)

            def objective(vec):
                return component_objective(MapComponent(k, vec[0], vec[1:]), samples)

            point = np.concatenate([[comp.intercept], comp.weights])
            numeric = finite_difference_gradient(objective, point, step=1e-5)
            np.testing.assert_allclose(grad, numeric, rtol=1e-6, atol=1e-9)

    def test_nonpositive_diagonal_raises(self):
        with pytest.raises(NonMonotoneMapError):
            component_gradient(MapComponent(1, 0.0, [-1.0]), np.array([[1.0]]))


class TestEstimateComponent:
    def test_one_dimensional_standardization(self):
        """The optimum maps z to (z - mean) / std; checked against both the
        closed-form expression and a brute-force grid minimization."""
        rng = np.random.default_rng(5)
        samples = rng.normal(1.5, 0.8, size=(200, 1))
        mu = samples.mean()
        sd = samples.std()
        comp = estimate_component(samples, 1, GRADIENT)
        assert comp.intercept == pytest.approx(-mu / sd, abs=1e-4)
        assert comp.diagonal == pytest.approx(1.0 / sd, abs=1e-4)
        grid_u0, grid_u1 = grid_minimize_affine_1d(samples)
        assert comp.intercept == pytest.approx(grid_u0, abs=1e-3)
        assert comp.diagonal == pytest.approx(grid_u1, abs=1e-3)

    def test_plus_minus_one_samples(self):
        comp = estimate_component(np.array([[-1.0], [1.0]]), 1, GRADIENT)
        assert comp.intercept == pytest.approx(0.0, abs=1e-5)
        assert comp.diagonal == pytest.approx(1.0, abs=1e-5)

    def test_matches_closed_form_row(self):
        rng = np.random.default_rng(17)
        cov = np.array([[2.0, 0.6, 0.1], [0.6, 1.0, -0.3], [0.1, -0.3, 1.5]])
        samples = rng.multivariate_normal([0.5, -1.0, 2.0], cov, size=400)
        oracle = closed_form_gaussian_map(samples)
        for k in (1, 2, 3):
            comp = estimate_component(samples, k, GRADIENT)
            ref = oracle.components[k - 1]
            np.testing.assert_allclose(comp.weights, ref.weights, atol=1e-4)
            assert comp.intercept == pytest.approx(ref.intercept, abs=1e-4)

    def test_start_independence(self):
        """Convex problem: different feasible starts agree within 10x tol."""
        rng = np.random.default_rng(2)
        samples = rng.standard_normal((300, 2)) * [1.5, 0.7]
        a = estimate_component(samples, 2, GRADIENT)
        start = MapComponent(2, 5.0, [3.0, 4.0])
        b = estimate_component(samples, 2, GRADIENT, start=start)
        np.testing.assert_allclose(a.weights, b.weights, atol=10 * GRADIENT.tol)
        assert a.intercept == pytest.approx(b.intercept, abs=10 * GRADIENT.tol)

    def test_too_few_samples(self):
        with pytest.raises(EstimationError, match="component 3"):
            estimate_component(np.zeros((3, 3)), 3, GRADIENT)

    def test_singular_covariance(self):
        samples = np.tile([1.0, 2.0], (10, 1))
        with pytest.raises(EstimationError, match="component 2"):
            estimate_component(samples, 2, GRADIENT)


class TestClosedFormGaussianMap:
    def test_standardized_samples_give_identity(self):
        rng = np.random.default_rng(9)
        z = rng.standard_normal((2000, 3))
        # Force exact zero mean and identity covariance.
        z = z - z.mean(axis=0)
        cov = z.T @ z / len(z)
        z = z @ np.linalg.inv(np.linalg.cholesky(cov)).T
        m = closed_form_gaussian_map(z)
        for k, comp in enumerate(m.components, start=1):
            expected = np.zeros(k)
            expected[-1] = 1.0
            np.testing.assert_allclose(comp.weights, expected, atol=1e-6)
            assert comp.intercept == pytest.approx(0.0, abs=1e-6)

    def test_one_dimensional_affine(self):
        # mean 3, std 2 exactly: {1, 5} -> (z - 3) / 2
        m = closed_form_gaussian_map(np.array([[1.0], [5.0]]))
        comp = m.components[0]
        assert comp.intercept == pytest.approx(-1.5, rel=1e-8)
        assert comp.diagonal == pytest.approx(0.5, rel=1e-8)

    def test_matches_gradient_solver(self):
        rng = np.random.default_rng(13)
        samples = rng.multivariate_normal([1.0, -1.0], [[1.0, 0.7], [0.7, 2.0]], 500)
        oracle = closed_form_gaussian_map(samples)
        fitted = estimate_map(samples, 0, GRADIENT)
        for got, want in zip(fitted.components, oracle.components):
            np.testing.assert_allclose(got.weights, want.weights, atol=1e-4)
            assert got.intercept == pytest.approx(want.intercept, abs=1e-4)

    def test_degenerate_samples(self):
        with pytest.raises(EstimationError):
            closed_form_gaussian_map(np.ones((20, 2)))


class TestEstimateMap:
    def test_standard_normal_near_identity(self):
        rng = np.random.default_rng(29)
        z = rng.standard_normal((10_000, 3))
        m = estimate_map(z, 0, SolverOptions())
        for k, comp in enumerate(m.components, start=1):
            expected = np.zeros(k)
            expected[-1] = 1.0
            np.testing.assert_allclose(comp.weights, expected, atol=0.1)
            assert abs(comp.intercept) < 0.1

    def test_point_mass_errors(self):
        with pytest.raises(EstimationError):
            estimate_map(np.tile([0.5, 1.5], (50, 1)), 0, SolverOptions())

    def test_obs_block_left_as_identity(self):
        rng = np.random.default_rng(31)
        samples = rng.standard_normal((200, 4))
        m = estimate_map(samples, 2, SolverOptions())
        assert m.obs_block_size == 2
        for k in (1, 2):
            comp = m.components[k - 1]
            expected = np.zeros(k)
            expected[-1] = 1.0
            np.testing.assert_allclose(comp.weights, expected)

    def test_gradient_and_closed_form_agree_on_lower_block(self):
        rng = np.random.default_rng(37)
        cov = np.array([[1.0, 0.4, 0.0], [0.4, 1.2, 0.5], [0.0, 0.5, 0.9]])
        samples = rng.multivariate_normal([0.0, 1.0, -2.0], cov, size=600)
        a = estimate_map(samples, 1, SolverOptions())
        b = estimate_map(samples, 1, GRADIENT)
        for got, want in zip(b.components[1:], a.components[1:]):
            np.testing.assert_allclose(got.weights, want.weights, atol=1e-4)


class TestPriorToPosterior:
    def test_identity_when_conditioning_on_own_observation(self):
        rng = np.random.default_rng(41)
        samples = rng.standard_normal((300, 4)) @ rng.standard_normal((4, 4))
        m = closed_form_gaussian_map(samples, obs_block_size=2)
        y_star = np.array([0.2, -0.4])
        xs = rng.standard_normal((80, 2))
        ys = np.tile(y_star, (80, 1))
        out = prior_to_posterior(m, y_star, ys, xs)
        np.testing.assert_allclose(out, xs, rtol=1e-10, atol=1e-12)

    def test_zero_observation_weights_ignore_conditioning(self):
        comps = (
            identity_component(1),
            MapComponent(2, 0.5, [0.0, 2.0]),
            MapComponent(3, -0.2, [0.0, 0.3, 1.5]),
        )
        m = AffineTriangularMap(3, comps, obs_block_size=1)
        rng = np.random.default_rng(43)
        xs = rng.standard_normal((30, 2))
        ys = rng.standard_normal((30, 1))
        out = prior_to_posterior(m, [99.0], ys, xs)
        np.testing.assert_allclose(out, xs, rtol=1e-12, atol=1e-12)

    def test_linear_gaussian_matches_kalman(self):
        """Joint (y, x) samples conditioned on y* reproduce the exact
        Gaussian conditional within Monte Carlo error."""
        rng = np.random.default_rng(47)
        m_samples = 40_000
        prior_mean = np.array([1.0, -2.0])
        prior_cov = np.array([[1.5, 0.4], [0.4, 0.8]])
        obs_matrix = np.array([[1.0, 0.0], [0.0, 1.0]])
        obs_std = 0.5
        xs = rng.multivariate_normal(prior_mean, prior_cov, size=m_samples)
        ys = xs @ obs_matrix.T + obs_std * rng.standard_normal((m_samples, 2))
        y_star = np.array([1.4, -1.5])
        tmap = closed_form_gaussian_map(np.column_stack([ys, xs]), obs_block_size=2)
        posterior = prior_to_posterior(tmap, y_star, ys, xs)
        exact_mean, exact_cov = kalman_posterior(
            prior_mean, prior_cov, obs_matrix, obs_std**2 * np.eye(2), y_star
        )
        mean_se = np.sqrt(np.diag(exact_cov) / m_samples)
        np.testing.assert_array_less(
            np.abs(posterior.mean(axis=0) - exact_mean), 3 * mean_se
        )
        sample_cov = np.cov(posterior.T, bias=True)
        cov_se = np.sqrt(
            (np.outer(np.diag(exact_cov), np.diag(exact_cov)) + exact_cov**2)
            / m_samples
        )
        np.testing.assert_array_less(np.abs(sample_cov - exact_cov), 3 * cov_se)


class TestPushforwardNormality:
    def test_estimated_map_standardizes_training_data(self):
        rng = np.random.default_rng(53)
        m_samples = 2000
        cov = np.array([[2.0, -0.5], [-0.5, 1.0]])
        samples = rng.multivariate_normal([3.0, -1.0], cov, size=m_samples)
        tmap = estimate_map(samples, 0, SolverOptions())
        pushed = evaluate(tmap, samples)
        bound = 3.0 / math.sqrt(m_samples)
        var_lo = 1.0 - 6.0 / math.sqrt(m_samples)
        var_hi = 1.0 + 6.0 / math.sqrt(m_samples)
        assert np.all(np.abs(pushed.mean(axis=0)) <= bound)
        variances = pushed.var(axis=0)
        assert np.all(variances >= var_lo) and np.all(variances <= var_hi)
