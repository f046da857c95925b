"""
Django management command for a single ADMM run.
"""
from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from apps.admm.stopping import StopCriterion
from apps.core.exceptions import AdmmError
from apps.core.management.base import EXIT_CAP, ExperimentCommand
from apps.experiments.config import ALGORITHMS, PROBLEMS, RunConfig
from apps.experiments.runs import SUMMARY_COLUMNS, execute_run


class Command(ExperimentCommand):
    help = 'Run ADMM, Fast-ADMM or Variable-ADMM on one model problem'

    def add_arguments(self, parser):
        parser.add_argument('--problem', choices=PROBLEMS, required=True)
        parser.add_argument('--level', type=int, required=True, help='Refinement level')
        parser.add_argument(
            '--tau-exp',
            type=int,
            default=1,
            help='Initial step size tau = h^-m, m in 0..3'
        )
        parser.add_argument(
            '--tau-opt',
            action='store_true',
            help='Use the optimized step size instead of h^-m (obstacle only)'
        )
        parser.add_argument('--algorithm', choices=ALGORITHMS, default='admm')
        parser.add_argument(
            '--stop',
            choices=[criterion.value for criterion in StopCriterion],
            default=StopCriterion.RESIDUAL.value,
        )
        parser.add_argument('--eps', type=float, default=None, help='Stopping tolerance')
        parser.add_argument('--seed', type=int, default=None, help='Seed of the ROF noise')
        parser.add_argument('--max-iter', type=int, default=None, help='Iteration cap')
        parser.add_argument(
            '--output',
            type=str,
            default=None,
            help='Trace CSV (default: ADMM_OUTPUT_DIR/trace-<run>.csv)'
        )
        parser.add_argument('--cache-dir', type=str, default=None, help='Reference cache directory')
        parser.add_argument(
            '--no-error',
            action='store_true',
            help='Skip the reference solution and E_h (not allowed with --stop ref-error)'
        )

    def handle(self, *args, **options):
        config = RunConfig(
            problem=options['problem'],
            level=options['level'],
            tau_exponent=options['tau_exp'],
            algorithm=options['algorithm'],
            stop=options['stop'],
            epsilon=options['eps'],
            seed=options['seed'],
            max_iter=options['max_iter'],
            output=options['output'] or self._default_output(options),
            tau_opt=options['tau_opt'],
        )

        try:
            outcome = execute_run(config, options['cache_dir'], with_error=not options['no_error'])
        except AdmmError as exc:
            raise CommandError(str(exc)) from exc

        self.stdout.write(','.join(SUMMARY_COLUMNS))
        self.stdout.write(outcome.summary_line())

        if outcome.failure:
            raise CommandError(outcome.failure)
        if outcome.hit_cap:
            raise CommandError(
                f"No termination within {config.max_iter} iterations", returncode=EXIT_CAP
            )

    def _default_output(self, options) -> Path:
        m = 'opt' if options['tau_opt'] else options['tau_exp']
        name = (
            f"trace-{options['problem']}-l{options['level']}-m{m}-"
            f"{options['algorithm']}-{options['stop']}.csv"
        )
        return Path(settings.ADMM_OUTPUT_DIR) / name
