"""
Base class of the project's management commands.

Argument errors and ValidationErrors surface as CommandError with exit
code 1; commands signal a run that ended at its iteration cap with exit
code 2.
"""
from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

EXIT_USAGE = 1
EXIT_CAP = 2


class ExperimentCommand(BaseCommand):
    requires_system_checks = []

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        # argparse would exit with status 2; route usage errors through CommandError.
        parser.called_from_command_line = False
        return parser

    def execute(self, *args, **options):
        try:
            return super().execute(*args, **options)
        except ValidationError as exc:
            raise CommandError('; '.join(exc.messages), returncode=EXIT_USAGE) from exc
