"""
Load the Celery app with Django so the table-cell and reference tasks in
tasks/experiments.py bind to it.
"""

from .celery import app as celery_app

__all__ = ('celery_app',)
