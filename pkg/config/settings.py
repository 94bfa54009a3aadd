"""
Django settings for the PReP stochastic optimal-control solver.

The project has no web surface: every entry point is a management command
(see simulations/management/commands). Settings only wire the apps, the
logging configuration and the solver defaults.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

from pathlib import Path
import os

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')

SECRET_KEY = os.environ.get('DJANGO_SECRET_KEY', 'prep-control-local-key')

DEBUG = os.environ.get('DEBUG', 'False') == 'True'

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'dynamics.apps.DynamicsConfig',
    'control.apps.ControlConfig',
    'simulations.apps.SimulationsConfig',
]

# Runs are file based; nothing is persisted.
DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Solver defaults. Every key can be overridden with PREP_<KEY>.
PREP_CONTROL = {
    'TIME_STEP_DENOMINATOR': int(os.environ.get('PREP_TIME_STEP_DENOMINATOR', '1000')),
    'TERMINAL_TIME': float(os.environ.get('PREP_TERMINAL_TIME', '25')),
    'N_PATHS': int(os.environ.get('PREP_N_PATHS', '10')),
    'MASTER_SEED': int(os.environ.get('PREP_MASTER_SEED', '42')),
    'RELAXATION_OLD': float(os.environ.get('PREP_RELAXATION_OLD', '0.9')),
    'RELAXATION_NEW': float(os.environ.get('PREP_RELAXATION_NEW', '0.1')),
    'SWEEP_TOL_REL': float(os.environ.get('PREP_SWEEP_TOL_REL', '1e-4')),
    'SWEEP_MAX_ITERS': int(os.environ.get('PREP_SWEEP_MAX_ITERS', '500')),
    'BUDGET_TOL_REL': float(os.environ.get('PREP_BUDGET_TOL_REL', '0.01')),
    'BUDGET_LAMBDA_MAX0': float(os.environ.get('PREP_BUDGET_LAMBDA_MAX0', '1.0')),
    'BUDGET_MAX_DOUBLINGS': int(os.environ.get('PREP_BUDGET_MAX_DOUBLINGS', '60')),
    'BUDGET_MAX_BISECTIONS': int(os.environ.get('PREP_BUDGET_MAX_BISECTIONS', '60')),
    'OUTPUT_DIR': os.environ.get('PREP_OUTPUT_DIR', 'output'),
    'SUMMARY_SCHEMA_VERSION': 1,
    'CSV_FLOAT_FORMAT': '%.17g',
}

LOG_LEVEL = os.environ.get('PREP_LOG_LEVEL', 'INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'solver': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'solver',
        },
    },
    'loggers': {
        'dynamics': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
        'control': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
        'simulations': {'handlers': ['console'], 'level': LOG_LEVEL, 'propagate': False},
    },
}
