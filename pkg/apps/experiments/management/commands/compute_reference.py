"""
Django management command to compute and cache a reference solution.
"""
from django.core.management.base import CommandError

from apps.core.exceptions import ReferenceNotConverged
from apps.core.management.base import EXIT_CAP, ExperimentCommand
from apps.experiments.config import PROBLEMS
from apps.experiments.references import get_reference, reference_path
from tasks.experiments import compute_reference_task


class Command(ExperimentCommand):
    help = 'Compute the reference solution of a model problem and store it in the cache'

    def add_arguments(self, parser):
        parser.add_argument('--problem', choices=PROBLEMS, required=True)
        parser.add_argument('--level', type=int, required=True, help='Refinement level (<= 9)')
        parser.add_argument('--seed', type=int, default=None, help='Seed of the ROF noise')
        parser.add_argument('--cache-dir', type=str, default=None, help='Reference cache directory')
        parser.add_argument('--force', action='store_true', help='Recompute even if cached')
        parser.add_argument(
            '--async',
            action='store_true',
            help='Run as async Celery task'
        )

    def handle(self, *args, **options):
        problem, level, seed = options['problem'], options['level'], options['seed']
        cache_dir, force = options['cache_dir'], options['force']

        if options['async']:
            task = compute_reference_task.delay(problem, level, seed, cache_dir, force)
            self.stdout.write(self.style.SUCCESS(f'Task started with ID: {task.id}'))
            return

        try:
            reference = get_reference(problem, level, seed, cache_dir, force=force)
        except ReferenceNotConverged as exc:
            raise CommandError(str(exc), returncode=EXIT_CAP) from exc

        path = reference_path(problem, level, seed, cache_dir)
        if reference.report is not None:
            self.stdout.write(f"Computed in {reference.report.N} iterations")
        self.stdout.write(self.style.SUCCESS(str(path)))
