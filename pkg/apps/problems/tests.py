import math

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase
from numpy.testing import assert_allclose
from scipy.optimize import minimize_scalar

from apps.admm.state import AdmmState
from apps.fem.mesh import build_mesh
from apps.fem.spaces import interpolate, mass_matrix, norm_lumped
from apps.problems.data import (
    NOISE_AMPLITUDE,
    disk_indicator,
    make_rof_data,
    uniform_noise,
)
from apps.problems.obstacle import ObstacleProblem, obstacle_p_step
from apps.problems.rof import RofProblem, rof_p_step, shrink
from apps.problems.step_size import optimal_step_for, optimal_step_size


def make_state(u, lam, tau):
    return AdmmState(
        j=1, u=u, u_prev=u, p=None, lam=lam, lam_prev=lam,
        tau=tau, gamma=None, R=0.0, R_dual=0.0, R_primal=0.0,
    )


class ObstaclePStepTests(SimpleTestCase):

    def setUp(self):
        self.mesh = build_mesh(2)
        self.problem = ObstacleProblem(self.mesh)
        self.rng = np.random.default_rng(1)

    def test_examples(self):
        chi = np.full(3, -0.25)
        no_boundary = np.array([], dtype=int)
        p = obstacle_p_step(np.array([0.5, -0.5, 0.0]), np.array([0.0, 0.0, 1.0]), 2.0, chi, no_boundary)
        assert_allclose(p, [0.5, -0.25, 0.5])

    def test_boundary_values_are_zero(self):
        u = self.rng.uniform(-1, 1, self.mesh.num_nodes)
        p = self.problem.solve_p(u, np.zeros_like(u), 1.0)
        assert_allclose(p[self.mesh.boundary_nodes], 0.0)

    def test_matches_nodewise_minimization(self):
        tau = 3.0
        u = self.rng.uniform(-1, 1, self.mesh.num_nodes)
        lam = self.rng.uniform(-2, 2, self.mesh.num_nodes)
        p = self.problem.solve_p(u, lam, tau)
        for z in np.flatnonzero(self.mesh.interior_mask):
            result = minimize_scalar(
                lambda q: -lam[z] * q + 0.5 * tau * (u[z] - q) ** 2,
                bounds=(-0.25, 10.0), method='bounded', options={'xatol': 1e-12},
            )
            self.assertAlmostEqual(p[z], result.x, delta=1e-6)


class ObstacleUStepTests(SimpleTestCase):

    def setUp(self):
        self.mesh = build_mesh(2)
        self.rng = np.random.default_rng(2)

    def test_zero_data(self):
        problem = ObstacleProblem(self.mesh, f=0.0)
        zero = problem.zero_primal()
        assert_allclose(problem.solve_u(zero, zero, 4.0), 0.0)

    def test_penalty_limit(self):
        problem = ObstacleProblem(self.mesh)
        p = np.where(self.mesh.interior_mask, self.rng.uniform(-0.1, 0.1, self.mesh.num_nodes), 0.0)
        u = problem.solve_u(p, problem.zero_dual(), 1e8)
        self.assertLessEqual(norm_lumped(u - p, problem.beta), 1e-5)

    def test_solves_optimality_system(self):
        problem = ObstacleProblem(self.mesh)
        tau = 7.0
        p = np.where(self.mesh.interior_mask, self.rng.uniform(-0.3, 0.3, self.mesh.num_nodes), 0.0)
        lam = np.where(self.mesh.interior_mask, self.rng.uniform(-1, 1, self.mesh.num_nodes), 0.0)
        u = problem.solve_u(p, lam, tau)
        assert_allclose(u[self.mesh.boundary_nodes], 0.0)
        gradient = problem.stiffness @ u - problem.load + problem.beta * (lam + tau * (u - p))
        assert_allclose(gradient[self.mesh.interior_mask], 0.0, atol=1e-10)

    def test_consistent_and_lumped_loads_agree_for_constant_source(self):
        lumped = ObstacleProblem(self.mesh, lumped_source=True)
        consistent = ObstacleProblem(self.mesh, lumped_source=False)
        assert_allclose(lumped.load, consistent.load, atol=1e-14)

    def test_obstacle_must_not_be_positive_on_boundary(self):
        with self.assertRaises(ValidationError):
            ObstacleProblem(self.mesh, chi=0.1)


class ObstacleFunctionalTests(SimpleTestCase):

    def setUp(self):
        self.mesh = build_mesh(3)
        self.problem = ObstacleProblem(self.mesh)
        self.rng = np.random.default_rng(3)

    def random_function(self):
        return np.where(self.mesh.interior_mask, self.rng.uniform(-0.2, 0.2, self.mesh.num_nodes), 0.0)

    def test_c0_bound(self):
        zero = self.problem.zero_primal()
        self.assertEqual(self.problem.c0_bound(make_state(zero, zero, 1.0)), 1.0)
        three = np.full(self.mesh.num_nodes, 3.0)
        self.assertAlmostEqual(self.problem.c0_bound(make_state(three, zero, 1.0)), 3.0, places=12)
        lam = np.full(self.mesh.num_nodes, 8.0)
        self.assertAlmostEqual(self.problem.c0_bound(make_state(zero, lam, 2.0)), 4.0, places=12)

    def test_energy(self):
        zero = self.problem.zero_primal()
        self.assertEqual(self.problem.energy(zero), 0.0)
        below = np.where(self.mesh.interior_mask, -1.0, 0.0)
        self.assertEqual(self.problem.energy(below), math.inf)
        v = self.random_function()
        self.assertAlmostEqual(self.problem.energy(v), self.problem.g_value(v))

    def test_strong_convexity(self):
        alpha_g = self.problem.constants.alpha_g
        for _ in range(5):
            v, w = self.random_function(), self.random_function()
            lower = (self.problem.g_value(v) + self.problem.g_derivative(v, w - v)
                     + alpha_g * self.problem.norm_x(w - v) ** 2)
            self.assertGreaterEqual(self.problem.g_value(w), lower - 1e-9 * max(1.0, abs(lower)))

    def test_gradient_is_co_coercive(self):
        l_g = self.problem.constants.l_g
        for _ in range(5):
            v, w = self.random_function(), self.random_function()
            diff = self.problem.gradient_g(v) - self.problem.gradient_g(w)
            lhs = self.problem.inner_x(diff, v - w)
            rhs = self.problem.norm_x(diff) ** 2 / l_g
            self.assertGreaterEqual(lhs, rhs - 1e-10 * max(1.0, rhs))

    def test_gradient_represents_derivative(self):
        v, direction = self.random_function(), self.random_function()
        self.assertAlmostEqual(
            self.problem.inner_x(self.problem.gradient_g(v), direction),
            self.problem.g_derivative(v, direction),
            delta=1e-9,
        )


class RofPStepTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(4)

    def test_shrink_examples(self):
        v = np.array([[0.0, 0.0], [0.3, 0.4], [3.0, 0.0]])
        assert_allclose(shrink(v, 1.0), [[0.0, 0.0], [0.0, 0.0], [2.0, 0.0]])

    def test_p_step_examples(self):
        h, tau = build_mesh(3).h, 2.0
        c = h ** -2 / tau
        grad_u = np.array([[3.0 * c, 0.0], [0.0, 0.5 * c]])
        p = rof_p_step(grad_u, np.zeros_like(grad_u), tau, h)
        assert_allclose(p, [[2.0 * c, 0.0], [0.0, 0.0]])

    def test_shrink_does_not_increase_magnitude(self):
        v = self.rng.standard_normal((100, 2))
        p = shrink(v, 0.5)
        self.assertTrue(np.all(np.linalg.norm(p, axis=1) <= np.linalg.norm(v, axis=1) + 1e-15))

    def test_shrink_is_optimal(self):
        threshold = 0.7
        v = self.rng.standard_normal((200, 2))
        p = shrink(v, threshold)

        def objective(q):
            return threshold * np.linalg.norm(q, axis=1) + 0.5 * np.sum((q - v) ** 2, axis=1)

        best = objective(p)
        for _ in range(20):
            trial = p + 1e-3 * self.rng.standard_normal(p.shape)
            self.assertTrue(np.all(objective(trial) >= best - 1e-12))

        magnitude = np.linalg.norm(p, axis=1)
        active = magnitude > 0.0
        stationarity = threshold * p[active] / magnitude[active, None] + (p[active] - v[active])
        assert_allclose(stationarity, 0.0, atol=1e-12)
        self.assertTrue(np.all(np.linalg.norm(v[~active], axis=1) <= threshold + 1e-12))


class RofProblemTests(SimpleTestCase):

    def setUp(self):
        self.mesh = build_mesh(3)
        self.data = make_rof_data(3, 0)
        self.problem = RofProblem(self.mesh, self.data.g)

    def test_u_step_with_constant_datum(self):
        problem = RofProblem(self.mesh, np.full(self.mesh.num_nodes, 0.7))
        u = problem.solve_u(problem.zero_dual(), problem.zero_dual(), 5.0)
        assert_allclose(u, 0.7, atol=1e-10)

    def test_u_step_vanishing_step_returns_datum(self):
        p = np.random.default_rng(5).standard_normal((self.mesh.num_elements, 2))
        u = self.problem.solve_u(p, self.problem.zero_dual(), 1e-12)
        assert_allclose(u, self.data.g, atol=1e-8)

    def test_c0_bound(self):
        zero_u, zero_lam = self.problem.zero_primal(), self.problem.zero_dual()
        self.assertAlmostEqual(
            self.problem.c0_bound(make_state(zero_u, zero_lam, 1.0)), 8.0 / math.sqrt(2.0), places=12,
        )

    def test_c0_bound_is_at_least_one_for_large_steps(self):
        h = self.mesh.h
        zero_u, zero_lam = self.problem.zero_primal(), self.problem.zero_dual()
        self.assertEqual(self.problem.c0_bound(make_state(zero_u, zero_lam, h ** -3)), 1.0)
        state = make_state(0.1 * self.data.g, zero_lam, h ** -3)
        bare = RofProblem(self.mesh, self.data.g, c0_floor=0.0).c0_bound(state)
        self.assertLess(bare, 1.0)
        self.assertEqual(self.problem.c0_bound(state), max(1.0, bare))

    def test_c0_bound_without_floor_tends_to_gradient_norm(self):
        problem = RofProblem(self.mesh, self.data.g, c0_floor=0.0)
        state = make_state(self.data.g, problem.zero_dual(), 1e12)
        grad_norm = problem.norm_y(problem.apply_b(self.data.g))
        self.assertAlmostEqual(problem.c0_bound(state), grad_norm, places=9)

    def test_energy(self):
        x = interpolate(self.mesh, lambda x, y: x)
        self.assertAlmostEqual(self.problem.total_variation(x), 1.0, places=12)
        self.assertAlmostEqual(self.problem.energy(self.data.g), self.problem.total_variation(self.data.g))

    def test_strong_convexity_of_fidelity(self):
        rng = np.random.default_rng(6)
        alpha_g = self.problem.constants.alpha_g
        for _ in range(5):
            v, w = rng.standard_normal(self.mesh.num_nodes), rng.standard_normal(self.mesh.num_nodes)
            lower = (self.problem.g_value(v) + self.problem.g_derivative(v, w - v)
                     + alpha_g * self.problem.norm_x(w - v) ** 2)
            self.assertGreaterEqual(self.problem.g_value(w), lower - 1e-9 * max(1.0, abs(lower)))

    def test_dual_is_element_field(self):
        self.assertEqual(self.problem.zero_dual().shape, (self.mesh.num_elements, 2))
        self.assertFalse(self.problem.constants.complete)


class RofDataTests(SimpleTestCase):

    def test_deterministic(self):
        first, second = make_rof_data(4, 2), make_rof_data(4, 2)
        assert_allclose(first.g, second.g)

    def test_seeds_differ(self):
        self.assertFalse(np.allclose(make_rof_data(3, 0).noise, make_rof_data(3, 1).noise))

    def test_noise_is_bounded(self):
        noise = make_rof_data(5, 0).noise
        self.assertTrue(np.all(np.abs(noise) <= NOISE_AMPLITUDE))

    def test_noise_is_the_same_function_on_all_levels(self):
        coarse = make_rof_data(3, 7).noise
        fine = make_rof_data(5, 7).noise
        assert_allclose(fine[:coarse.size], coarse)

    def test_clean_image(self):
        data = make_rof_data(3, 0)
        mesh = build_mesh(3)
        center = int(np.argmin(np.sum((mesh.nodes - 0.5) ** 2, axis=1)))
        self.assertEqual(data.g_clean[center], 1.0)
        self.assertEqual(data.g_clean[0], 0.0)
        self.assertEqual(disk_indicator(np.array([0.7]), np.array([0.5]))[0], 1.0)

    def test_level_too_coarse(self):
        with self.assertRaises(ValidationError):
            make_rof_data(2, 0)

    def test_invalid_seed(self):
        with self.assertRaises(ValidationError):
            uniform_noise(10, -1)

    def test_uniform_distribution(self):
        samples = uniform_noise(20000, 0, amplitude=1.0)
        self.assertTrue(np.all((samples >= -1.0) & (samples < 1.0)))
        self.assertLess(abs(float(samples.mean())), 0.03)


class OptimalStepTests(SimpleTestCase):

    def test_obstacle(self):
        for level in (2, 4):
            mesh = build_mesh(level)
            step = optimal_step_for(ObstacleProblem(mesh))
            self.assertAlmostEqual(step.tau * mesh.h, math.pi / math.sqrt(2.0), places=12)
            self.assertAlmostEqual(step.gamma, 1.0 / (1.0 + math.pi * mesh.h / (4.0 * math.sqrt(2.0))), places=12)

    def test_unit_constants(self):
        step = optimal_step_size(1.0, 1.0, 1.0, 1.0)
        self.assertAlmostEqual(step.tau, math.sqrt(2.0))
        self.assertAlmostEqual(step.gamma, 1.0 / (1.0 + math.sqrt(2.0)))

    def test_invalid_constants(self):
        with self.assertRaises(ValidationError):
            optimal_step_size(0.0, 1.0, 1.0, 1.0)

    def test_rof_has_no_optimal_step(self):
        mesh = build_mesh(3)
        with self.assertRaises(ValidationError):
            optimal_step_for(RofProblem(mesh, np.zeros(mesh.num_nodes)))

    def test_mass_rows_match_lumped_weights(self):
        mesh = build_mesh(2)
        assert_allclose(np.asarray(mass_matrix(mesh).sum(axis=1)).ravel(), ObstacleProblem(mesh).beta)
