"""
Django settings for seqfront_project project.

The project has no web surface and no database: it is driven entirely
through management commands (see fronthaul/management/commands).

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path
import os

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get('SEQFRONT_SECRET_KEY', 'django-insecure-seqfront-local-only')

DEBUG = os.environ.get('SEQFRONT_DEBUG', '0') == '1'

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'fronthaul.apps.FronthaulConfig',
]

# Results live in CSV/SVG files; nothing is persisted in a database.
DATABASES = {}


# Internationalization
# https://docs.djangoproject.com/en/5.2/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Reference scenario for simulate_fronthaul. Keys are command-line flag
# names with '_' instead of '-'; a --config file and explicit flags override them.
SEQFRONT_DEFAULTS = {
    'l_list': [2, 4, 8, 16, 32, 64, 128],
    'total_antennas': 128,
    'users': 4,
    'scheme': ['vc'],
    'memory': 'fap',
    'capacity_kb': [64],
    'alloc': 'per-ap-load',
    'subcarriers': 1024,
    'trials': 100,
    'seed': 0,
    'power_dbm': 10.0,
    'noise_dbm': -85.0,
    'perimeter_m': 500.0,
    'inner_perimeter_m': 400.0,
    'height_m': 5.0,
    'tau_factor': 1.0,
    'correlation': 'iid',
    'rho': 0.0,
}

# Concurrent trials (threads)
SEQFRONT_WORKERS = int(os.environ.get('SEQFRONT_WORKERS', '1'))

# Relative --out/--plot paths are resolved against this directory
SEQFRONT_RESULTS_DIR = os.environ.get('SEQFRONT_RESULTS_DIR', str(BASE_DIR / 'results'))

SEQFRONT_LOG_LEVEL = os.environ.get('SEQFRONT_LOG_LEVEL', 'INFO').upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'fronthaul': {
            'handlers': ['console'],
            'level': SEQFRONT_LOG_LEVEL,
            'propagate': False,
        },
    },
}
