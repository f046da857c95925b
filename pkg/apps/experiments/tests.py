import io
import math
import shutil
import tempfile
from pathlib import Path
from unittest import mock

import pandas as pd
import pytest
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from apps.admm.policies import FastPolicy, FixedPolicy, VariablePolicy
from apps.core.exceptions import ReferenceNotConverged, SolverError
from apps.core.utils import HYPHEN
from apps.experiments.builders import build_policy, build_problem, mesh_size, tau_bar
from apps.experiments.config import RunConfig, default_epsilon, error_scale
from apps.experiments.references import get_reference, load_reference, reference_path
from apps.experiments.runs import SUMMARY_COLUMNS, execute_run, run_cell
from apps.experiments.tables import SINGLE_COMPONENT_MAX_ITER, TABLES, build_table, cell_sort_key, get_table
from apps.fem.mesh import build_mesh
from apps.problems.obstacle import ObstacleProblem



def failing_problem(level, failing_call):
    """Obstacle problem whose u-step raises on the given call."""
    problem = ObstacleProblem(build_mesh(level))
    solve_u = problem.solve_u
    calls = []

    def solve(*args, **kwargs):
        calls.append(1)
        if len(calls) == failing_call:
            raise SolverError('no convergence', residual=1.0, iterations=10)
        return solve_u(*args, **kwargs)

    problem.solve_u = solve
    return problem


class TempDirMixin:

    def setUp(self):
        super().setUp()
        self.tmp = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmp, ignore_errors=True)
        override = override_settings(ADMM_CACHE_DIR=self.tmp / 'cache', ADMM_OUTPUT_DIR=self.tmp / 'out')
        override.enable()
        self.addCleanup(override.disable)


class RunConfigTests(SimpleTestCase):

    def test_defaults(self):
        config = RunConfig('obstacle', 3)
        self.assertEqual(config.max_iter, 1000)
        self.assertEqual(config.seed, 0)
        self.assertEqual(config.m_label, '1')
        self.assertEqual(RunConfig('rof', 3).max_iter, 10000)

    def test_validation(self):
        with self.assertRaises(ValidationError):
            RunConfig('obstacle', 3, tau_exponent=7)
        with self.assertRaises(ValidationError):
            RunConfig('rof', 2)
        with self.assertRaises(ValidationError):
            RunConfig('heat', 3)
        with self.assertRaises(ValidationError):
            RunConfig('obstacle', 3, algorithm='adam')
        with self.assertRaises(ValidationError):
            RunConfig('obstacle', 3, stop='energy')
        with self.assertRaises(ValidationError):
            RunConfig('obstacle', 3, epsilon=-1.0)

    def test_optimal_step(self):
        config = RunConfig('obstacle', 3, tau_opt=True)
        self.assertIsNone(config.tau_exponent)
        self.assertEqual(config.m_label, 'opt')

    def test_dict_round_trip(self):
        config = RunConfig('rof', 4, tau_exponent=2, algorithm='fast', seed=3, output='trace.csv')
        self.assertEqual(RunConfig(**config.to_dict()), config)

    def test_default_tolerances(self):
        h = mesh_size(3)
        self.assertEqual(default_epsilon('obstacle', 'ref-error', h), 1e-3)
        self.assertEqual(default_epsilon('rof', 'ref-error', h), 1e-2)
        self.assertAlmostEqual(default_epsilon('obstacle', 'residual', h), h ** 2)
        self.assertAlmostEqual(default_epsilon('rof', 'primal-only', h), h)
        self.assertAlmostEqual(error_scale('rof', h), math.sqrt(h))

    def test_builders(self):
        self.assertAlmostEqual(tau_bar(mesh_size(3), 2), 32.0)
        self.assertIsInstance(build_policy('admm', 4.0), FixedPolicy)
        self.assertIsInstance(build_policy('fast', 4.0), FastPolicy)
        variable = build_policy('variable', 0.5)
        self.assertIsInstance(variable, VariablePolicy)
        self.assertEqual((variable.tau_min, variable.tau_max), (0.5, 0.5))
        self.assertIs(build_problem('obstacle', 3, 1), build_problem('obstacle', 3, 0))


class ReferenceTests(TempDirMixin, SimpleTestCase):

    def test_compute_and_reload(self):
        reference = get_reference('obstacle', 3)
        path = reference_path('obstacle', 3)
        self.assertTrue(path.exists())
        self.assertEqual(path.read_text().splitlines()[0].split()[0], 'obstacle')
        self.assertTrue(reference.report.converged)

        cached = get_reference('obstacle', 3)
        self.assertIsNone(cached.report)
        self.assertEqual(cached.u.tolist(), reference.u.tolist())
        self.assertEqual(cached.lam.tolist(), reference.lam.tolist())

    def test_recompute_is_byte_identical(self):
        get_reference('obstacle', 3)
        path = reference_path('obstacle', 3)
        first = path.read_bytes()
        get_reference('obstacle', 3, force=True)
        self.assertEqual(path.read_bytes(), first)

    def test_header(self):
        get_reference('rof', 3, seed=1)
        header = reference_path('rof', 3, 1).read_text().splitlines()[0].split()
        self.assertEqual(header[:2], ['rof', '3'])
        self.assertAlmostEqual(float(header[2]), mesh_size(3) ** -1.5)
        self.assertEqual(float(header[3]), 1e-4)
        self.assertEqual(header[4], '1')

    def test_paths(self):
        self.assertEqual(reference_path('obstacle', 3, 5), reference_path('obstacle', 3, 0))
        self.assertNotEqual(reference_path('rof', 3, 0), reference_path('rof', 3, 1))
        self.assertIn('-s1-', reference_path('rof', 3, 1).name)

    def test_cap_leaves_no_file(self):
        with override_settings(ADMM_REFERENCE_MAX_ITER=2):
            with self.assertRaises(ReferenceNotConverged):
                get_reference('obstacle', 3)
        cache = self.tmp / 'cache'
        self.assertEqual(list(cache.glob('*')) if cache.exists() else [], [])

    def test_mismatched_file(self):
        path = self.tmp / 'broken.txt'
        path.write_text('obstacle 3 2.0 1e-09 0\n0.0\n0.0\n')
        with self.assertRaises(ValueError):
            load_reference(path)

    def test_invalid_level(self):
        with self.assertRaises(ValidationError):
            get_reference('rof', 2)


class RunTests(TempDirMixin, SimpleTestCase):

    def test_obstacle_residual_run(self):
        outcome = execute_run(RunConfig('obstacle', 3, tau_exponent=2))
        self.assertTrue(outcome.ok)
        self.assertGreaterEqual(outcome.report.N, 7)
        self.assertLessEqual(outcome.report.N, 11)
        self.assertIsNotNone(outcome.ratio)
        values = outcome.summary_values()
        self.assertEqual(len(values), len(SUMMARY_COLUMNS))
        self.assertEqual(values[:4], ['obstacle', '3', '2', 'admm'])

    def test_variable_with_unit_step_matches_admm(self):
        admm = execute_run(RunConfig('obstacle', 3, tau_exponent=0, stop='ref-error'))
        variable = execute_run(RunConfig('obstacle', 3, tau_exponent=0, algorithm='variable', stop='ref-error'))
        self.assertEqual(variable.report.N, admm.report.N)
        self.assertEqual(variable.report.residuals, admm.report.residuals)

    def test_trace_file(self):
        output = self.tmp / 'trace.csv'
        outcome = execute_run(RunConfig('obstacle', 3, tau_exponent=2, output=output), with_error=False)
        frame = pd.read_csv(output)
        self.assertEqual(len(frame), outcome.report.N)
        self.assertEqual(frame['j'].tolist(), list(range(1, outcome.report.N + 1)))
        self.assertIsNone(outcome.error)

    def test_solver_failure_writes_partial_trace(self):
        output = self.tmp / 'partial.csv'
        with mock.patch('apps.experiments.runs.build_problem', return_value=failing_problem(3, 3)):
            outcome = execute_run(RunConfig('obstacle', 3, tau_exponent=2, output=output), with_error=False)
        self.assertIn('no convergence', outcome.failure)
        self.assertEqual(outcome.report.N, 2)
        frame = pd.read_csv(output)
        self.assertEqual(frame['j'].tolist(), [1, 2])

    def test_capped_cell(self):
        cell = run_cell(RunConfig('obstacle', 3, tau_exponent=0, max_iter=2))
        self.assertEqual(cell['terminated_by'], 'cap')
        self.assertIsNone(cell['N'])
        self.assertIsNone(cell['ratio'])

    def test_optimal_step_is_rejected_for_rof(self):
        cell = run_cell(RunConfig('rof', 3, tau_opt=True))
        self.assertIsNotNone(cell['failure'])
        self.assertIsNone(cell['N'])


def make_cell(problem, level, m, alg, N, ratio=0.5, **extra):
    cell = {
        'problem': problem, 'level': level, 'm': str(m), 'alg': alg, 'stop': 'residual',
        'N': N, 'N_tau': None, 'N_gamma': None, 'N_re': None, 'E_h': None,
        'ratio': ratio, 'tau': 1.0, 'terminated_by': 'residual', 'failure': None,
    }
    cell.update(extra)
    return cell


class TableTests(SimpleTestCase):

    def test_registry(self):
        self.assertEqual(sorted(TABLES), [1, 2, 3, 4, 5])
        with self.assertRaises(ValidationError):
            get_table(6)

    def test_cells(self):
        cells = TABLES[2].cells(levels=[3, 4])
        self.assertEqual(len(cells), 2 * 4 * 3)
        self.assertEqual(cells, sorted(cells, key=cell_sort_key))
        self.assertEqual((cells[0].level, cells[0].tau_exponent, cells[0].algorithm), (3, 0, 'admm'))
        with self.assertRaises(ValidationError):
            TABLES[5].cells(levels=[8])

    def test_table_five_cells(self):
        cells = TABLES[5].cells(levels=[3])
        self.assertEqual({(c.problem, c.stop, c.tau_exponent) for c in cells},
                         {('obstacle', 'dual-only', 3), ('rof', 'primal-only', 0)})

    def test_iteration_caps(self):
        self.assertEqual({c.max_iter for c in TABLES[5].cells(levels=[6])}, {10 ** 4})
        self.assertEqual({c.max_iter for c in TABLES[1].cells(levels=[6])}, {1000})
        self.assertEqual({c.max_iter for c in TABLES[4].cells(levels=[3])}, {10 ** 4})
        self.assertEqual(SINGLE_COMPONENT_MAX_ITER, 10 ** 4)

    def test_layout(self):
        cells = [
            make_cell('obstacle', 3, 2, 'admm', 9, ratio=0.25),
            make_cell('obstacle', 3, 2, 'fast', 7, N_re=1),
            make_cell('obstacle', 3, 2, 'variable', 8, N_tau=2, N_gamma=0),
            make_cell('obstacle', 3, 3, 'admm', None, ratio=None, terminated_by='cap'),
        ]
        table = build_table(TABLES[2], cells)
        self.assertEqual(table['algorithm'].tolist(), ['admm', 'fast', 'variable'])
        self.assertEqual(table['N [tau=h^-2]'].tolist(), ['9', '7', '8'])
        self.assertEqual(table['annotation [tau=h^-2]'].tolist(), ['', '(1)', '(2,0)'])
        self.assertEqual(table['E_h/h [tau=h^-2]'].iloc[0], '0.2500')
        self.assertEqual(table['N [tau=h^-3]'].tolist(), [HYPHEN] * 3)
        self.assertEqual(table['E_h/h [tau=h^-3]'].iloc[0], HYPHEN)

    def test_layout_by_problem(self):
        cells = [make_cell('obstacle', 4, 3, 'admm', 12), make_cell('rof', 4, 0, 'fast', 30)]
        table = build_table(TABLES[5], cells)
        self.assertEqual(table['problem'].tolist(), ['obstacle', 'rof'])
        self.assertEqual(table['N [admm]'].tolist(), ['12', HYPHEN])
        self.assertEqual(table['N [fast]'].tolist(), [HYPHEN, '30'])
        self.assertIn('ratio [variable]', table.columns)


class CommandTests(TempDirMixin, SimpleTestCase):

    def call(self, *args):
        out = io.StringIO()
        call_command(*args, stdout=out, stderr=io.StringIO())
        return out.getvalue().splitlines()

    def test_run_admm(self):
        output = self.tmp / 'trace.csv'
        lines = self.call(
            'run_admm', '--problem', 'obstacle', '--level', '3', '--tau-exp', '2',
            '--output', str(output),
        )
        self.assertEqual(lines[0], ','.join(SUMMARY_COLUMNS))
        values = lines[1].split(',')
        self.assertEqual(values[:4], ['obstacle', '3', '2', 'admm'])
        self.assertTrue(7 <= int(values[4]) <= 11)
        self.assertTrue(output.exists())

    def test_run_admm_default_output(self):
        self.call('run_admm', '--problem', 'obstacle', '--level', '3', '--tau-exp', '2', '--no-error')
        self.assertTrue((self.tmp / 'out' / 'trace-obstacle-l3-m2-admm-residual.csv').exists())

    def test_invalid_exponent(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('run_admm', '--problem', 'obstacle', '--level', '3', '--tau-exp', '7')
        self.assertEqual(ctx.exception.returncode, 1)

    def test_invalid_problem(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('run_admm', '--problem', 'heat', '--level', '3')
        self.assertEqual(ctx.exception.returncode, 1)

    def test_cap_exit_code(self):
        output = self.tmp / 'capped.csv'
        with self.assertRaises(CommandError) as ctx:
            self.call(
                'run_admm', '--problem', 'obstacle', '--level', '3', '--tau-exp', '0',
                '--max-iter', '2', '--no-error', '--output', str(output),
            )
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertEqual(len(output.read_text().splitlines()), 3)

    def test_run_admm_solver_failure(self):
        output = self.tmp / 'partial.csv'
        with mock.patch('apps.experiments.runs.build_problem', return_value=failing_problem(3, 4)):
            with self.assertRaises(CommandError):
                self.call(
                    'run_admm', '--problem', 'obstacle', '--level', '3', '--tau-exp', '2',
                    '--no-error', '--output', str(output),
                )
        self.assertEqual(len(output.read_text().splitlines()), 4)

    def test_compute_reference(self):
        lines = self.call('compute_reference', '--problem', 'obstacle', '--level', '3')
        path = Path(lines[-1])
        self.assertTrue(path.exists())
        self.assertEqual(path, reference_path('obstacle', 3))
        self.call('compute_reference', '--problem', 'obstacle', '--level', '3')

    def test_compute_reference_async(self):
        self.call('compute_reference', '--problem', 'obstacle', '--level', '3', '--async')
        self.assertTrue(reference_path('obstacle', 3).exists())

    def test_reproduce_table(self):
        output = self.tmp / 'table2.csv'
        self.call('reproduce_table', '--table', '2', '--levels', '3', '--output', str(output))
        table = pd.read_csv(output, dtype=str, keep_default_na=False)
        self.assertEqual(table['algorithm'].tolist(), ['admm', 'fast', 'variable'])
        self.assertTrue(7 <= int(table['N [tau=h^-2]'].iloc[0]) <= 11)

    def test_reproduce_table_async(self):
        output = self.tmp / 'table2.csv'
        self.call('reproduce_table', '--table', '2', '--levels', '3', '--output', str(output), '--async')
        table = pd.read_csv(output, dtype=str, keep_default_na=False)
        self.assertEqual(len(table), 3)


@pytest.mark.slow
class TableAcceptanceTests(TempDirMixin, SimpleTestCase):
    """Iteration counts of the published tables, within tolerance."""

    def n(self, **kwargs):
        outcome = execute_run(RunConfig(**kwargs))
        self.assertTrue(outcome.ok, outcome.as_dict())
        return outcome.report.N, outcome.ratio

    def test_obstacle_reference_error(self):
        for level, expected in ((3, 159), (4, 221), (5, 241)):
            N, _ = self.n(problem='obstacle', level=level, tau_exponent=1, stop='ref-error')
            self.assertLessEqual(abs(N - expected), 0.15 * expected)
        for level, expected in ((3, 31), (4, 28), (5, 76)):
            N, _ = self.n(problem='obstacle', level=level, tau_exponent=2, stop='ref-error')
            self.assertLessEqual(abs(N - expected), 0.15 * expected)

    def test_variable_residual(self):
        for level, expected in ((3, 8), (5, 36), (6, 78)):
            N, ratio = self.n(problem='obstacle', level=level, tau_exponent=2, algorithm='variable')
            self.assertLessEqual(abs(N - expected), max(0.2 * expected, 2))
            self.assertLessEqual(ratio, 0.30)

    def test_variable_residual_level_four_certificate(self):
        # This run stops early on a tau = 2 iterate; the a posteriori bound
        # E_h^2 <= 2 C0~ R_N still holds for it.
        outcome = execute_run(RunConfig('obstacle', 4, tau_exponent=2, algorithm='variable'))
        self.assertTrue(outcome.ok, outcome.as_dict())
        self.assertLessEqual(outcome.report.N, 1.2 * 29)
        problem = build_problem('obstacle', 4, None)
        state = outcome.report.final_state
        self.assertLessEqual(outcome.error ** 2, 2 * problem.c0_bound(state) * state.R + 1e-6)
        self.assertLessEqual(outcome.ratio, 0.5)

    def test_variable_beats_capped_admm_at_large_step(self):
        for level in range(3, 8):
            N, _ = self.n(problem='obstacle', level=level, tau_exponent=3, algorithm='variable', stop='ref-error')
            self.assertLessEqual(N, 300)
        for level in range(5, 8):
            outcome = execute_run(RunConfig('obstacle', level, tau_exponent=3, stop='ref-error'))
            self.assertTrue(outcome.hit_cap, outcome.as_dict())

    def test_variable_obstacle_finest_residual(self):
        _, ratio = self.n(problem='obstacle', level=6, tau_exponent=3, algorithm='variable')
        self.assertLessEqual(ratio, 0.30)

    def test_variable_rof_residual(self):
        # a capped ADMM run still bounds its count from below
        admm = execute_run(RunConfig('rof', 6, tau_exponent=2)).report.N
        variable, ratio = self.n(problem='rof', level=6, tau_exponent=2, algorithm='variable')
        self.assertLessEqual(variable, 0.5 * admm)
        self.assertLessEqual(ratio, 0.30)

    def test_dual_only_error_grows(self):
        cells = [
            cell for cell in TABLES[5].cells(levels=[6])
            if cell.problem == 'obstacle' and cell.algorithm == 'admm'
        ]
        self.assertEqual(len(cells), 1)
        self.assertEqual(cells[0].max_iter, SINGLE_COMPONENT_MAX_ITER)
        outcome = execute_run(cells[0])
        self.assertTrue(outcome.ok, outcome.as_dict())
        self.assertGreater(outcome.ratio, 10.0)

    def test_primal_only_error_grows(self):
        ratios = []
        for level in range(3, 7):
            _, ratio = self.n(
                problem='rof', level=level, tau_exponent=0, stop='primal-only',
                max_iter=SINGLE_COMPONENT_MAX_ITER,
            )
            ratios.append(ratio)
        self.assertEqual(ratios, sorted(ratios))
        self.assertEqual(len(set(ratios)), len(ratios))
