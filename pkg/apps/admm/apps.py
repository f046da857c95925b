from django.apps import AppConfig


class AdmmConfig(AppConfig):
    name = 'apps.admm'
