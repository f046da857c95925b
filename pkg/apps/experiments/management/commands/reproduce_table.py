"""
Django management command to reproduce an iteration table.
"""
from pathlib import Path

from celery import group
from django.conf import settings

from apps.core.exceptions import AdmmError
from apps.core.management.base import ExperimentCommand
from apps.experiments.references import get_reference
from apps.experiments.runs import run_cell
from apps.experiments.tables import TABLES, build_table, cell_sort_key, get_table
from tasks.experiments import compute_reference_task, run_table_cell


class Command(ExperimentCommand):
    help = 'Run all cells of an iteration table and write it as CSV'

    def add_arguments(self, parser):
        parser.add_argument('--table', type=int, choices=sorted(TABLES), required=True)
        parser.add_argument(
            '--levels',
            type=int,
            nargs='+',
            default=None,
            help='Subset of the table levels (default: all)'
        )
        parser.add_argument('--seed', type=int, default=None, help='Seed of the ROF noise')
        parser.add_argument(
            '--output',
            type=str,
            default=None,
            help='Table CSV (default: ADMM_OUTPUT_DIR/table<id>.csv)'
        )
        parser.add_argument('--cache-dir', type=str, default=None, help='Reference cache directory')
        parser.add_argument(
            '--async',
            action='store_true',
            help='Dispatch the cells as a Celery group'
        )

    def handle(self, *args, **options):
        spec = get_table(options['table'])
        cells = spec.cells(options['seed'], options['levels'])
        cache_dir = options['cache_dir']
        run_async = options['async']

        self.stdout.write(f"Table {spec.table_id}: {len(cells)} cells")
        self._prepare_references(cells, cache_dir, run_async)

        if run_async:
            job = group(run_table_cell.s(cell.to_dict(), cache_dir) for cell in cells)
            results = job.apply_async().join()
        else:
            results = [run_cell(cell, cache_dir) for cell in cells]
        results = sorted(results, key=cell_sort_key)

        table = build_table(spec, results)
        output = Path(options['output'] or Path(settings.ADMM_OUTPUT_DIR) / f"table{spec.table_id}.csv")
        output.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(output, index=False)

        self.stdout.write(table.to_csv(index=False))
        failed = [cell for cell in results if cell['failure']]
        if failed:
            self.stdout.write(self.style.WARNING(f"{len(failed)} cells failed"))
        self.stdout.write(self.style.SUCCESS(f"Wrote {output}"))

    def _prepare_references(self, cells, cache_dir, run_async):
        """Compute each reference once before the cells read it."""
        keys = sorted({(cell.problem, cell.level, cell.seed) for cell in cells})
        if run_async:
            job = group(compute_reference_task.s(p, level, seed, cache_dir) for p, level, seed in keys)
            try:
                job.apply_async().join(propagate=False)
            except AdmmError as exc:
                # eager execution raises at dispatch
                self.stderr.write(f"Reference preparation failed: {exc}")
            return
        for problem, level, seed in keys:
            try:
                get_reference(problem, level, seed, cache_dir)
            except AdmmError as exc:
                # the cells of this level are reported as failed
                self.stderr.write(f"Reference {problem} l={level} unavailable: {exc}")
