"""
Settings for Celery workers computing table cells and references.
"""
from decouple import config

from .base import *  # noqa
from .base import LOGGING

DEBUG = False

# Workers share the reference cache, so it must be set explicitly.
ADMM_CACHE_DIR = Path(config('ADMM_CACHE_DIR'))  # noqa: F405

LOGGING['loggers']['apps']['level'] = 'WARNING'
CELERY_WORKER_PREFETCH_MULTIPLIER = 1
CELERY_TASK_ACKS_LATE = True
