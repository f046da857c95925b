import io
import math
from functools import lru_cache

import numpy as np
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from apps.admm.policies import (
    ACTION_DECREASE,
    ACTION_KEEP,
    ACTION_RELAX,
    ACTION_RESTART,
    EVENT_FAST_RESTARTED,
    EVENT_RESTARTED,
    FastPolicy,
    FixedPolicy,
    LOG_ROUNDING_SLACK,
    RestartBounds,
    StepPolicy,
    VariablePolicy,
    fast_policy_update,
    next_theta,
    restart_bounds,
    variable_policy_update,
)
from apps.admm.reports import TRACE_COLUMNS
from apps.admm.solver import distance_to_saddle, residual, run
from apps.admm.stopping import StopCriterion, StopRule
from apps.core.exceptions import RunAborted, SolverError
from apps.fem.mesh import build_mesh
from apps.fem.spaces import gradient_operator, lumped_weights, stiffness_matrix
from apps.problems.obstacle import ObstacleProblem
from apps.problems.rof import RofProblem

GOLDEN = 0.5 * (1.0 + math.sqrt(5.0))


@lru_cache(maxsize=None)
def obstacle(level):
    return ObstacleProblem(build_mesh(level))


@lru_cache(maxsize=None)
def saddle_point(level):
    """Obstacle saddle point to near machine precision."""
    problem = obstacle(level)
    report = run(problem, FixedPolicy(problem.mesh.h ** -1), StopRule.residual(1e-12, 50000))
    assert report.converged
    return report.final_state.u, report.final_state.lam


def collect(problem, policy, stop, **kwargs):
    states = []
    report = run(problem, policy, stop, callback=states.append, **kwargs)
    return report, states


class VariableUpdateTests(SimpleTestCase):
    bounds = dict(tau_min=1.0, tau_max=8.0, delta=0.5, gamma_max=0.999)

    def test_contraction_keeps_step(self):
        self.assertEqual(variable_policy_update(8.0, 0.5, 1.0, 3.0, **self.bounds), (8.0, 0.5, ACTION_KEEP))

    def test_missing_contraction_decreases_step(self):
        self.assertEqual(variable_policy_update(8.0, 0.5, 2.0, 3.0, **self.bounds), (4.0, 0.5, ACTION_DECREASE))

    def test_decrease_is_bounded_below(self):
        self.assertEqual(variable_policy_update(1.5, 0.5, 2.0, 3.0, **self.bounds), (1.0, 0.5, ACTION_DECREASE))

    def test_restart_at_minimal_step(self):
        self.assertEqual(variable_policy_update(1.0, 0.5, 2.0, 3.0, **self.bounds), (8.0, 0.75, ACTION_RESTART))

    def test_restart_caps_gamma(self):
        tau, gamma, action = variable_policy_update(1.0, 0.998, 3.0, 3.0, **self.bounds)
        self.assertEqual((tau, action), (8.0, ACTION_RESTART))
        self.assertAlmostEqual(gamma, 0.999, places=15)

    def test_limits_reached_keeps_going(self):
        self.assertEqual(variable_policy_update(1.0, 0.999, 5.0, 3.0, **self.bounds), (1.0, 0.999, ACTION_KEEP))

    def test_equal_step_bounds_relax_gamma(self):
        bounds = dict(self.bounds, tau_max=1.0)
        self.assertEqual(variable_policy_update(1.0, 0.5, 2.0, 3.0, **bounds), (1.0, 0.75, ACTION_RELAX))

    def test_invalid_parameters(self):
        with self.assertRaises(ValidationError):
            VariablePolicy(tau_max=0.5, tau_min=1.0)
        with self.assertRaises(ValidationError):
            VariablePolicy(tau_max=8.0, delta=1.0)
        with self.assertRaises(ValidationError):
            VariablePolicy(tau_max=8.0, gamma_min=0.9, gamma_max=0.5)


class FastUpdateTests(SimpleTestCase):

    def test_theta_sequence(self):
        self.assertAlmostEqual(next_theta(1.0), GOLDEN, places=12)
        self.assertAlmostEqual(next_theta(GOLDEN), 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * GOLDEN ** 2)), places=12)
        self.assertAlmostEqual(next_theta(GOLDEN), 2.193527, places=6)

    def test_extrapolation(self):
        u, u_prev = np.array([2.0]), np.array([1.0])
        lam, lam_prev = np.array([-1.0]), np.array([0.0])

        first = fast_policy_update(1.0, 0.999, u, u_prev, lam, lam_prev, 1.0, 2.0)
        self.assertFalse(first.restarted)
        self.assertAlmostEqual(first.theta, GOLDEN)
        assert_allclose(first.u_hat, u)
        self.assertEqual(first.stored_residual, 1.0)

        second = fast_policy_update(GOLDEN, 0.999, u, u_prev, lam, lam_prev, 1.0, 2.0)
        weight = (GOLDEN - 1.0) / second.theta
        assert_allclose(second.u_hat, [2.0 + weight])
        assert_allclose(second.lam_hat, [-1.0 - weight])

    def test_restart(self):
        u, u_prev = np.array([2.0]), np.array([1.0])
        update = fast_policy_update(3.0, 0.999, u, u_prev, u, u_prev, 1.0, 1.0)
        self.assertTrue(update.restarted)
        self.assertEqual(update.theta, 1.0)
        assert_allclose(update.u_hat, u_prev)
        self.assertAlmostEqual(update.stored_residual, 1.0 / 0.999)


class RestartBoundsTests(SimpleTestCase):

    def test_default_parameters(self):
        bounds = restart_bounds(0.5, 0.999, 0.5, 1.0, 32.0)
        self.assertEqual(bounds, RestartBounds(9, 5, None))

    def test_iterations_between_restarts(self):
        bounds = restart_bounds(0.5, 0.999, 0.5, 1.0, 32.0, eps_stop=1e-3, residual_first=1.0)
        self.assertEqual(bounds.max_iters_between, 5 + math.floor(math.log(1e-3) / math.log(0.999)))

    def test_equal_step_bounds(self):
        self.assertEqual(restart_bounds(0.5, 0.999, 0.5, 1.0, 1.0).min_iters_between, 0)

    def test_exact_powers_give_exact_counts(self):
        self.assertLess(LOG_ROUNDING_SLACK, 1e-6)
        for k in range(1, 31):
            self.assertEqual(restart_bounds(0.5, 0.999, 0.5, 1.0, 2.0 ** k).min_iters_between, k)
        for k in range(1, 9):
            self.assertEqual(restart_bounds(0.5, 0.999, 0.1, 1.0, 10.0 ** k).min_iters_between, k)
        self.assertEqual(restart_bounds(0.5, 0.75, 0.5, 1.0, 2.0).max_restarts, 1)
        self.assertEqual(restart_bounds(0.5, 0.9375, 0.5, 1.0, 2.0).max_restarts, 3)


class StopRuleTests(SimpleTestCase):

    def test_ref_error_needs_reference(self):
        with self.assertRaises(ValidationError):
            StopRule(StopCriterion.REF_ERROR, 1e-3, 10)

    def test_invalid_values(self):
        with self.assertRaises(ValidationError):
            StopRule.residual(0.0, 10)
        with self.assertRaises(ValidationError):
            StopRule.residual(1e-3, 0)
        with self.assertRaises(ValueError):
            StopRule('energy', 1e-3, 10)

    def test_threshold(self):
        self.assertEqual(StopRule.dual_only(1e-2, 5).threshold(4.0), 2.5e-3)
        self.assertEqual(StopRule.ref_error(np.zeros(1), 1e-2, 5).threshold(4.0), 1e-2)
        self.assertFalse(StopRule.ref_error(np.zeros(1), 1e-2, 5).needs_c0)


class ResidualTests(SimpleTestCase):

    def test_components(self):
        problem = obstacle(2)
        beta = lumped_weights(problem.mesh)
        center = int(np.argmin(np.sum((problem.mesh.nodes - 0.5) ** 2, axis=1)))
        u = np.zeros(problem.mesh.num_nodes)
        lam = np.zeros(problem.mesh.num_nodes)
        u[center], lam[center] = 1.0, 2.0

        R, dual, primal = residual((0 * u, 0 * lam), (u, lam), 3.0, problem)
        self.assertAlmostEqual(dual, 2.0 * math.sqrt(beta[center]))
        self.assertAlmostEqual(primal, 3.0 * math.sqrt(beta[center]))
        self.assertAlmostEqual(R, math.sqrt(13.0 * beta[center]))


class DenseOracleTests(SimpleTestCase):
    """One iteration against dense linear algebra."""

    def test_obstacle_iteration(self):
        problem = obstacle(2)
        mesh = problem.mesh
        rng = np.random.default_rng(11)
        interior = mesh.interior_mask
        u0 = np.where(interior, rng.uniform(-0.5, 0.5, mesh.num_nodes), 0.0)
        lam0 = np.where(interior, rng.uniform(-2.0, 2.0, mesh.num_nodes), 0.0)
        tau = 3.0

        report, states = collect(problem, FixedPolicy(tau), StopRule.residual(1e-30, 1), init=(u0, lam0))
        state = states[0]

        p = np.where(interior, np.maximum(-0.25, u0 + lam0 / tau), 0.0)
        beta = lumped_weights(mesh)
        K = stiffness_matrix(mesh).toarray()[np.ix_(interior, interior)]
        rhs = (beta * (-5.0) + beta * (tau * p - lam0))[interior]
        u = np.zeros(mesh.num_nodes)
        u[interior] = np.linalg.solve(K + tau * np.diag(beta[interior]), rhs)

        assert_allclose(state.p, p, atol=1e-14)
        assert_allclose(state.u, u, atol=1e-10)
        assert_allclose(state.lam, lam0 + tau * (u - p), atol=1e-9)
        self.assertTrue(report.hit_cap)

    def test_rof_iteration(self):
        mesh = build_mesh(2)
        rng = np.random.default_rng(5)
        g = rng.random(mesh.num_nodes)
        problem = RofProblem(mesh, g, alpha=20.0)
        u0 = rng.standard_normal(mesh.num_nodes)
        lam0 = rng.standard_normal((mesh.num_elements, 2))
        tau, h = 2.0, mesh.h

        _, states = collect(problem, FixedPolicy(tau), StopRule.residual(1e-30, 1), init=(u0, lam0))
        state = states[0]

        D = gradient_operator(mesh).toarray()
        v = (D @ u0).reshape(-1, 2) + lam0 / tau
        magnitude = np.linalg.norm(v, axis=1, keepdims=True)
        p = np.maximum(magnitude - h ** -2 / tau, 0.0) / np.where(magnitude > 0, magnitude, 1.0) * v

        weights = np.repeat(mesh.areas, 2)
        M = problem.mass.toarray()
        lhs = 20.0 * M + tau * h ** 2 * D.T @ (weights[:, None] * D)
        rhs = 20.0 * M @ g + h ** 2 * D.T @ (weights * (tau * p - lam0).ravel())
        u = np.linalg.solve(lhs, rhs)

        assert_allclose(state.p, p, atol=1e-12)
        assert_allclose(state.u, u, atol=1e-9)
        assert_allclose(state.lam, lam0 + tau * ((D @ u).reshape(-1, 2) - p), atol=1e-8)


class AdmmRunTests(SimpleTestCase):

    def test_obstacle_iteration_count(self):
        problem = obstacle(3)
        h = problem.mesh.h
        report = run(problem, FixedPolicy(h ** -2), StopRule.residual(h ** 2, 1000))
        self.assertTrue(report.converged)
        self.assertEqual(report.terminated_by, 'residual')
        self.assertGreaterEqual(report.N, 7)
        self.assertLessEqual(report.N, 11)
        self.assertEqual([r.j for r in report.trace], list(range(1, report.N + 1)))

    def test_saddle_point_is_fixed_point(self):
        problem = obstacle(2)
        _, states = collect(
            problem, FixedPolicy(5.0), StopRule.residual(1e-30, 1), init=saddle_point(2),
        )
        self.assertLessEqual(states[0].R, 1e-8)

    def test_cap(self):
        problem = obstacle(3)
        report = run(problem, FixedPolicy(1.0), StopRule.residual(1e-12, 3))
        self.assertTrue(report.hit_cap)
        self.assertFalse(report.converged)
        self.assertEqual(report.N, 3)

    def test_trace_csv(self):
        problem = obstacle(2)
        report = run(problem, FixedPolicy(4.0), StopRule.residual(1e-6, 100))
        buffer = io.StringIO()
        report.to_csv(buffer)
        lines = buffer.getvalue().splitlines()
        self.assertEqual(lines[0], ','.join(TRACE_COLUMNS))
        self.assertEqual(len(lines), report.N + 1)

    def test_solver_failure_keeps_partial_trace(self):
        problem = ObstacleProblem(build_mesh(2))
        solve_u = problem.solve_u
        calls = []

        def failing(*args, **kwargs):
            calls.append(1)
            if len(calls) == 3:
                raise SolverError('no convergence', residual=1.0, iterations=10)
            return solve_u(*args, **kwargs)

        problem.solve_u = failing
        with self.assertRaises(RunAborted) as ctx:
            run(problem, FixedPolicy(4.0), StopRule.residual(1e-12, 100))
        self.assertEqual(ctx.exception.report.N, 2)
        self.assertEqual(ctx.exception.report.terminated_by, 'error')



class HalvingPolicy(StepPolicy):
    """Halves tau every few iterations until tau_min."""
    name = 'halving'

    def __init__(self, tau: float, every: int = 3, tau_min: float = 1.0):
        super().__init__()
        self.tau_start, self.every, self.tau_min = tau, every, tau_min
        self.reset()

    def reset(self) -> None:
        self.tau = self.tau_start

    def after_iteration(self, state, residual_prev, init, previous):
        if state.j % self.every == 0:
            self.tau = max(0.5 * self.tau, self.tau_min)
        return self._keep(state)


class ResidualMonotonicityTests(SimpleTestCase):

    def assert_non_increasing(self, states):
        for before, after in zip(states, states[1:]):
            self.assertLessEqual(after.tau, before.tau)
            self.assertLessEqual(after.R, before.R * (1 + 1e-10) + 1e-12)

    def test_fixed_step(self):
        problem = obstacle(3)
        _, states = collect(problem, FixedPolicy(problem.mesh.h ** -2), StopRule.residual(1e-10, 200))
        self.assert_non_increasing(states)

    def test_decreasing_step(self):
        problem = obstacle(3)
        policy = HalvingPolicy(problem.mesh.h ** -3)
        _, states = collect(problem, policy, StopRule.residual(1e-10, 200))
        self.assertLess(states[-1].tau, states[0].tau)
        self.assert_non_increasing(states)

    def test_decreasing_step_rof(self):
        mesh = build_mesh(3)
        problem = RofProblem(mesh, np.linspace(0.0, 1.0, mesh.num_nodes))
        policy = HalvingPolicy(problem.mesh.h ** -2, every=2)
        _, states = collect(problem, policy, StopRule.residual(1e-10, 100))
        self.assert_non_increasing(states)

    def test_variable_between_restarts(self):
        problem = obstacle(3)
        report, states = collect(
            problem, VariablePolicy(tau_max=problem.mesh.h ** -3), StopRule.residual(problem.mesh.h ** 2, 1000),
        )
        restarts = {r.j for r in report.trace if r.event == EVENT_RESTARTED}
        segment = []
        for state in states:
            segment.append(state)
            if state.j in restarts:
                self.assert_non_increasing(segment)
                segment = []
        self.assert_non_increasing(segment)


class EnergyBoundTests(SimpleTestCase):
    """Fixed-step run at the step size of the saddle-point computation."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.problem = obstacle(3)
        cls.ref = saddle_point(3)
        cls.tau = cls.problem.mesh.h ** -1
        cls.report, cls.states = collect(cls.problem, FixedPolicy(cls.tau), StopRule.residual(1e-11, 5000))
        u_ref, lam_ref = cls.ref
        cls.d0 = math.hypot(
            cls.problem.norm_y(lam_ref), cls.tau * cls.problem.norm_y(cls.problem.apply_b(u_ref)),
        )

    def test_half_energy_inequality(self):
        total = 0.0
        for state in self.states:
            total += state.R ** 2
            dj = distance_to_saddle(state, self.ref, self.problem)
            self.assertLessEqual(0.5 * dj ** 2 + 0.5 * total, 0.5 * self.d0 ** 2 + 1e-8)

    def test_last_residual_decays_like_one_over_j(self):
        for state in self.states:
            self.assertLessEqual(state.j * state.R ** 2, self.d0 ** 2 + 1e-8)

class ConvergenceBoundTests(SimpleTestCase):
    """Energy decay of ADMM measured against a precomputed saddle point."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.problem = obstacle(3)
        cls.ref = saddle_point(3)
        cls.tau = cls.problem.mesh.h ** -2
        cls.report, cls.states = collect(cls.problem, FixedPolicy(cls.tau), StopRule.residual(1e-10, 200))

    def test_distance_and_residual_sum_bounded_by_initial_distance(self):
        problem, tau = self.problem, self.tau
        d0 = math.hypot(
            problem.norm_y(self.ref[1]), tau * problem.norm_y(self.ref[0]),
        )
        total = 0.0
        for state in self.states:
            total += state.R ** 2
            dj = distance_to_saddle(state, self.ref, problem)
            self.assertLessEqual(dj ** 2 + total, d0 ** 2 * (1 + 1e-6) + 1e-8)

    def test_distance_is_non_increasing(self):
        distances = [distance_to_saddle(s, self.ref, self.problem) for s in self.states]
        for before, after in zip(distances, distances[1:]):
            self.assertLessEqual(after, before * (1 + 1e-8) + 1e-10)

    def test_error_controlled_by_residual(self):
        problem, tau = self.problem, self.tau
        u_ref, lam_ref = self.ref
        for state in self.states:
            error = problem.rho_g(u_ref, state.u)
            weight = problem.norm_y(lam_ref - state.lam) / tau + problem.norm_y(u_ref - state.u)
            self.assertLessEqual(error, weight * state.R * (1 + 1e-6) + 1e-8)
            self.assertLessEqual(error, 2.0 * problem.c0_bound(state) * state.R * (1 + 1e-6) + 1e-8)


class VariablePolicyRunTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.problem = obstacle(3)
        h = cls.problem.mesh.h
        cls.tau_max = h ** -3
        cls.policy = VariablePolicy(tau_max=cls.tau_max)
        cls.report, cls.states = collect(cls.problem, cls.policy, StopRule.residual(h ** 2, 1000))

    def test_converges(self):
        self.assertTrue(self.report.converged)

    def test_step_sizes_within_bounds(self):
        for state in self.states:
            self.assertGreaterEqual(state.tau, 1.0)
            self.assertLessEqual(state.tau, self.tau_max)

    def test_gamma_non_decreasing(self):
        gammas = [state.gamma for state in self.states]
        self.assertEqual(gammas, sorted(gammas))
        self.assertLessEqual(gammas[-1], 0.999)

    def test_restarts_bounded(self):
        bounds = restart_bounds(0.5, 0.999, 0.5, 1.0, self.tau_max)
        self.assertLessEqual(self.report.n_gamma, bounds.max_restarts)
        restarts = [r.j for r in self.report.trace if r.event == EVENT_RESTARTED]
        self.assertEqual(len(restarts), self.report.n_gamma)
        previous = 0
        for j in restarts:
            self.assertGreaterEqual(j - previous, bounds.min_iters_between)
            previous = j

    def test_distance_bounded_by_initial_distance(self):
        u_ref, lam_ref = saddle_point(3)
        problem = self.problem
        d0 = math.hypot(problem.norm_y(lam_ref), self.tau_max * problem.norm_y(u_ref))
        for state in self.states:
            dj = distance_to_saddle(state, (u_ref, lam_ref), problem)
            self.assertLessEqual(dj, d0 * (1 + 1e-6) + 1e-8)

    def test_restart_accounting(self):
        # Each segment between restarts starts again from the initial pair at
        # tau_max, so it satisfies the energy inequality on its own.
        u_ref, lam_ref = saddle_point(3)
        problem = self.problem
        d0 = math.hypot(problem.norm_y(lam_ref), self.tau_max * problem.norm_y(problem.apply_b(u_ref)))
        restarts = [r.j for r in self.report.trace if r.event == EVENT_RESTARTED]
        self.assertGreaterEqual(len(restarts), 1)
        ends = restarts + [self.states[-1].j]
        by_j = {state.j: state for state in self.states}
        start, summed = 1, 0.0
        for end in ends:
            segment = [by_j[j] for j in range(start, end + 1) if j in by_j]
            residuals = sum(state.R ** 2 for state in segment)
            dj = distance_to_saddle(segment[-1], (u_ref, lam_ref), problem)
            self.assertLessEqual(0.5 * dj ** 2 + 0.5 * residuals, 0.5 * d0 ** 2 * (1 + 1e-6) + 1e-8)
            summed += 0.5 * dj ** 2
            start = end + 1
        self.assertLessEqual(summed, 0.5 * len(ends) * d0 ** 2 * (1 + 1e-6) + 1e-8)

    def test_equal_step_bounds_reduce_to_admm(self):
        problem = obstacle(3)
        stop = StopRule.residual(problem.mesh.h ** 2, 1000)
        fixed = run(problem, FixedPolicy(1.0), stop)
        variable = run(problem, VariablePolicy(tau_max=1.0, tau_min=1.0), stop)
        self.assertEqual(variable.N, fixed.N)
        assert_allclose(variable.residuals, fixed.residuals, rtol=1e-12)


class FastPolicyRunTests(SimpleTestCase):

    def test_restart_consumes_previous_iterate(self):
        problem = obstacle(3)
        h = problem.mesh.h
        policy = FastPolicy(h ** -2, gamma=0.5)
        report, states = collect(problem, policy, StopRule.residual(h ** 2, 1000))

        self.assertGreaterEqual(report.n_re, 1)
        restarts = [r.j for r in report.trace if r.event == EVENT_FAST_RESTARTED]
        self.assertEqual(len(restarts), report.n_re)
        zero = problem.zero_primal()
        for j in restarts:
            if j >= len(states):
                continue
            consumed = states[j]
            expected_u = states[j - 2].u if j >= 2 else zero
            expected_lam = states[j - 2].lam if j >= 2 else zero
            assert_allclose(consumed.u_prev, expected_u)
            assert_allclose(consumed.lam_prev, expected_lam)

    def test_counters_reset_between_runs(self):
        problem = obstacle(2)
        policy = FastPolicy(4.0, gamma=0.5)
        stop = StopRule.residual(1e-6, 200)
        first = run(problem, policy, stop)
        second = run(problem, policy, stop)
        self.assertEqual(first.n_re, second.n_re)
        self.assertEqual(first.N, second.N)
