"""
Django management command to write a mesh in the debug text format.
"""
from apps.core.management.base import ExperimentCommand
from apps.fem.mesh import build_mesh, dump_mesh


class Command(ExperimentCommand):
    help = 'Write the nodes (x y) and elements (i j k) of T_level'

    def add_arguments(self, parser):
        parser.add_argument('--level', type=int, required=True, help='Refinement level')
        parser.add_argument(
            '--output',
            type=str,
            default=None,
            help='Output file (default: standard output)'
        )

    def handle(self, *args, **options):
        mesh = build_mesh(options['level'])
        if options['output']:
            with open(options['output'], 'w') as stream:
                dump_mesh(mesh, stream)
            self.stdout.write(self.style.SUCCESS(f"Wrote {mesh} to {options['output']}"))
        else:
            dump_mesh(mesh, self.stdout)
