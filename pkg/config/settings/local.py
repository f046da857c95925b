"""
Single-machine settings, also used by the test-suite.
Table cells dispatched to Celery run inline without a broker.
"""
from .base import *  # noqa

CELERY_TASK_ALWAYS_EAGER = True
CELERY_TASK_EAGER_PROPAGATES = True
CELERY_BROKER_URL = 'memory://'
CELERY_RESULT_BACKEND = 'cache+memory://'
