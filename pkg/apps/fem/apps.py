from django.apps import AppConfig


class FemConfig(AppConfig):
    name = 'apps.fem'
    verbose_name = 'P1 finite elements on the unit square'
