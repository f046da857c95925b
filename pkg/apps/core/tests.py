import numpy as np
import scipy.sparse as sp
from django.core.exceptions import ValidationError
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from apps.core.exceptions import AssemblyError, SolverError
from apps.core.linalg import SpdSystem, assemble_from_triplets, finalize, solve_spd
from apps.core.utils import HYPHEN, content_hash, format_count, format_pair, format_real, format_scientific
from apps.core.validators import (
    validate_contraction_bounds,
    validate_level,
    validate_max_iter,
    validate_step_bounds,
    validate_tau_exponent,
)


def laplacian_1d(n):
    return finalize(sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]))


class AssemblyTests(SimpleTestCase):

    def test_duplicates_are_summed(self):
        matrix = assemble_from_triplets(2, [(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)])
        assert_allclose(matrix.toarray(), [[3.0, 0.0], [-1.0, 0.0]])

    def test_entries_summing_to_zero_are_not_stored(self):
        matrix = assemble_from_triplets(2, [(0, 1, 1.0), (0, 1, -1.0), (1, 1, 4.0)])
        self.assertEqual(matrix.nnz, 1)

    def test_laplacian_stencil(self):
        triplets = []
        for i in range(3):
            triplets.append((i, i, 2.0))
            if i > 0:
                triplets += [(i, i - 1, -1.0), (i - 1, i, -1.0)]
        matrix = assemble_from_triplets(3, triplets)
        assert_allclose(matrix.toarray(), [[2, -1, 0], [-1, 2, -1], [0, -1, 2]])
        self.assertEqual(matrix.indices.tolist(), [0, 1, 0, 1, 2, 1, 2])

    def test_empty_triplets_give_zero_matrix(self):
        matrix = assemble_from_triplets(3, [])
        self.assertEqual(matrix.shape, (3, 3))
        self.assertEqual(matrix.nnz, 0)

    def test_out_of_range_index(self):
        with self.assertRaises(AssemblyError):
            assemble_from_triplets(2, [(0, 2, 1.0)])
        with self.assertRaises(AssemblyError):
            assemble_from_triplets(2, [(-1, 0, 1.0)])


class SolveSpdTests(SimpleTestCase):

    def setUp(self):
        self.matrix = laplacian_1d(50)
        self.b = np.random.default_rng(0).standard_normal(50)

    def test_small_systems(self):
        assert_allclose(solve_spd(sp.identity(2, format='csr'), np.array([3.0, 4.0])), [3.0, 4.0])
        assert_allclose(solve_spd(sp.diags([2.0, 4.0]).tocsr(), np.array([2.0, 4.0])), [1.0, 1.0])

    def test_matches_dense_solve(self):
        x = solve_spd(self.matrix, self.b)
        expected = np.linalg.solve(self.matrix.toarray(), self.b)
        assert_allclose(x, expected, rtol=1e-8, atol=1e-10)

    def test_residual_meets_tolerance(self):
        x = solve_spd(self.matrix, self.b, rel_tol=1e-10)
        self.assertLessEqual(np.linalg.norm(self.matrix @ x - self.b), 1e-9 * np.linalg.norm(self.b))

    def test_zero_rhs(self):
        assert_allclose(solve_spd(self.matrix, np.zeros(50)), np.zeros(50))

    def test_warm_start_with_solution_returns_it(self):
        x = solve_spd(self.matrix, self.b)
        assert_allclose(solve_spd(self.matrix, self.b, x0=x, max_iter=1), x)

    def test_iteration_cap(self):
        with self.assertRaises(SolverError) as ctx:
            solve_spd(self.matrix, self.b, max_iter=1)
        self.assertEqual(ctx.exception.iterations, 1)
        self.assertGreater(ctx.exception.residual, 0.0)

    def test_iterations_counted_across_restarts(self):
        with self.assertRaises(SolverError) as ctx:
            solve_spd(self.matrix, self.b, max_iter=3)
        self.assertEqual(ctx.exception.iterations, 3)

    def test_jacobi_preconditioner_solves_diagonal_system_in_one_step(self):
        diagonal = np.logspace(0, 8, 40)
        b = np.random.default_rng(1).standard_normal(40)
        assert_allclose(solve_spd(sp.diags(diagonal).tocsr(), b, max_iter=1), b / diagonal, rtol=1e-10)

    def test_spd_system_methods_agree(self):
        direct = SpdSystem(self.matrix, method='direct').solve(self.b)
        cg = SpdSystem(self.matrix, method='cg').solve(self.b)
        assert_allclose(direct, cg, rtol=1e-8, atol=1e-10)

    def test_unknown_method(self):
        with self.assertRaises(ValueError):
            SpdSystem(self.matrix, method='lu')


class ValidatorTests(SimpleTestCase):

    def test_level(self):
        validate_level(0)
        validate_level(12)
        for bad in (-1, 13, 2.5, True):
            with self.assertRaises(ValidationError):
                validate_level(bad)

    def test_tau_exponent(self):
        for m in range(4):
            validate_tau_exponent(m)
        with self.assertRaises(ValidationError):
            validate_tau_exponent(7)

    def test_step_bounds(self):
        validate_step_bounds(1.0, 1.0)
        with self.assertRaises(ValidationError):
            validate_step_bounds(2.0, 1.0)
        with self.assertRaises(ValidationError):
            validate_step_bounds(0.0, 1.0)

    def test_contraction_bounds(self):
        validate_contraction_bounds(0.5, 0.999)
        with self.assertRaises(ValidationError):
            validate_contraction_bounds(0.5, 1.0)
        with self.assertRaises(ValidationError):
            validate_contraction_bounds(0.9, 0.5)

    def test_max_iter(self):
        validate_max_iter(1)
        with self.assertRaises(ValidationError):
            validate_max_iter(0)


class FormattingTests(SimpleTestCase):

    def test_missing_values_render_as_hyphen(self):
        self.assertEqual(format_count(None), HYPHEN)
        self.assertEqual(format_real(None), HYPHEN)
        self.assertEqual(format_real(float('nan')), HYPHEN)
        self.assertEqual(format_scientific(None), HYPHEN)

    def test_values(self):
        self.assertEqual(format_count(27), '27')
        self.assertEqual(format_real(0.12345), '0.1235')
        self.assertEqual(format_pair(3, 1), '(3,1)')
        self.assertEqual(format_scientific(1234.5, 2), '1.23e+03')

    def test_content_hash_is_stable(self):
        self.assertEqual(content_hash('rof', 3, 0), content_hash('rof', 3, 0))
        self.assertNotEqual(content_hash('rof', 3, 0), content_hash('rof', 3, 1))
        self.assertEqual(len(content_hash('x')), 16)
