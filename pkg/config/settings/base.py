"""
Base settings for the ADMM step-size laboratory.
"""

from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

SECRET_KEY = config('SECRET_KEY', default='django-insecure-change-this-in-production')

DEBUG = config('DEBUG', default=True, cast=bool)

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'apps.core',
    'apps.fem',
    'apps.admm',
    'apps.problems',
    'apps.experiments',
]

# Management commands and Celery workers only; nothing is persisted in a database.
DATABASES = {}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

# Celery Configuration
CELERY_BROKER_URL = config('CELERY_BROKER_URL', default='redis://localhost:6379/0')
CELERY_RESULT_BACKEND = config('CELERY_RESULT_BACKEND', default='redis://localhost:6379/0')
CELERY_ACCEPT_CONTENT = ['json']
CELERY_TASK_SERIALIZER = 'json'
CELERY_RESULT_SERIALIZER = 'json'
CELERY_TIMEZONE = TIME_ZONE

# Output locations
ADMM_CACHE_DIR = Path(config('ADMM_CACHE_DIR', default=str(BASE_DIR / 'var' / 'references')))
ADMM_OUTPUT_DIR = Path(config('ADMM_OUTPUT_DIR', default=str(BASE_DIR / 'var' / 'output')))

# Linear solver
ADMM_CG_REL_TOL = config('ADMM_CG_REL_TOL', default=1e-12, cast=float)
ADMM_CG_MAX_ITER_FACTOR = config('ADMM_CG_MAX_ITER_FACTOR', default=10, cast=int)
ADMM_SOLVER_METHOD = config('ADMM_SOLVER_METHOD', default='direct')

# Step-size policies
ADMM_R_BAR = config('ADMM_R_BAR', default=1e30, cast=float)
ADMM_TAU_MIN = config('ADMM_TAU_MIN', default=1.0, cast=float)
ADMM_DELTA = config('ADMM_DELTA', default=0.5, cast=float)
ADMM_GAMMA_MIN = config('ADMM_GAMMA_MIN', default=0.5, cast=float)
ADMM_GAMMA_MAX = config('ADMM_GAMMA_MAX', default=0.999, cast=float)
ADMM_FAST_GAMMA = config('ADMM_FAST_GAMMA', default=0.999, cast=float)

# Iteration caps
ADMM_OBSTACLE_MAX_ITER = config('ADMM_OBSTACLE_MAX_ITER', default=1000, cast=int)
ADMM_ROF_MAX_ITER = config('ADMM_ROF_MAX_ITER', default=10000, cast=int)
ADMM_REFERENCE_MAX_ITER = config('ADMM_REFERENCE_MAX_ITER', default=200000, cast=int)

# Model problems
ADMM_ROF_ALPHA = config('ADMM_ROF_ALPHA', default=20.0, cast=float)
ADMM_DEFAULT_SEED = config('ADMM_DEFAULT_SEED', default=0, cast=int)
ADMM_LUMPED_SOURCE = config('ADMM_LUMPED_SOURCE', default=True, cast=bool)

# Logging Configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'INFO',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'apps': {
            'handlers': ['console'],
            'level': config('ADMM_LOG_LEVEL', default='INFO'),
            'propagate': False,
        },
        'tasks': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
    },
}
