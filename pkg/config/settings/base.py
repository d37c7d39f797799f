"""
Base settings to build other settings files upon.
"""
import os
from pathlib import Path

import environ

ROOT_DIR = Path(__file__).resolve(strict=True).parent.parent.parent
# hybrid_borrowing/
APPS_DIR = ROOT_DIR / "hybrid_borrowing"
env = environ.Env()

READ_DOT_ENV_FILE = env.bool("DJANGO_READ_DOT_ENV_FILE", default=False)
if READ_DOT_ENV_FILE:
    # OS environment variables take precedence over variables from .env
    env.read_env(str(ROOT_DIR / ".env"))

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#debug
DEBUG = env.bool("DJANGO_DEBUG", False)
# https://docs.djangoproject.com/en/dev/ref/settings/#time-zone
TIME_ZONE = "Europe/Vienna"
# https://docs.djangoproject.com/en/dev/ref/settings/#language-code
LANGUAGE_CODE = "en-GB"
# https://docs.djangoproject.com/en/dev/ref/settings/#use-i18n
USE_I18N = False
# https://docs.djangoproject.com/en/dev/ref/settings/#use-tz
USE_TZ = True

# DATABASES
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#databases
# Nothing is persisted in the database; results are written as CSV/JSON files.
DATABASES = {
    "default": env.db("DATABASE_URL", default=f"sqlite:///{ROOT_DIR / 'db.sqlite3'}"),
}
# https://docs.djangoproject.com/en/dev/ref/settings/#default-auto-field
DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# APPS
# ------------------------------------------------------------------------------
DJANGO_APPS = [
    "django.contrib.contenttypes",
]
LOCAL_APPS = [
    "hybrid_borrowing.apps.HybridBorrowingConfig",
]
# https://docs.djangoproject.com/en/dev/ref/settings/#installed-apps
INSTALLED_APPS = DJANGO_APPS + LOCAL_APPS

# CACHES
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#caches
CACHES = {
    "default": {
        "BACKEND": "django.core.cache.backends.locmem.LocMemCache",
        "LOCATION": "",
    },
    # fitted MAP priors keyed by (pool, hyper-prior, fit settings)
    "map_fits": {
        "BACKEND": "django.core.cache.backends.locmem.LocMemCache",
        "LOCATION": "map-fits",
        "TIMEOUT": None,
        "OPTIONS": {"MAX_ENTRIES": env.int("HYBRID_MAP_CACHE_ENTRIES", default=20000)},
    },
}

# ADMIN
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#admins
ADMINS = [("""Hybrid borrowing maintainers""", "maintainers@example.org")]
# https://docs.djangoproject.com/en/dev/ref/settings/#managers
MANAGERS = ADMINS

# Your stuff...
# ------------------------------------------------------------------------------

# Simulation defaults
# ------------------------------------------------------------------------------
HYBRID_THREADS = env.int("HYBRID_THREADS", default=1)
HYBRID_OUTPUT_DIR = env("HYBRID_OUTPUT_DIR", default=str(ROOT_DIR / "results"))
HYBRID_DATA_DIR = APPS_DIR / "data"
HYBRID_CONFIG_DIR = APPS_DIR / "configs"

# LOGGING
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#logging
LOGS_DIR = os.path.join(str(ROOT_DIR), 'logs')
os.makedirs(LOGS_DIR, exist_ok=True)
HYBRID_LOG_FILE = env("HYBRID_LOG_FILE", default=os.path.join(LOGS_DIR, 'hybrid_borrowing.log'))

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {funcName} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'run_file': {
            'level': 'INFO',
            'class': 'logging.FileHandler',
            'filename': HYBRID_LOG_FILE,
            'formatter': 'verbose',
        },
        'console': {
            'level': 'WARNING',
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'hybrid_borrowing': {
            'handlers': ['run_file', 'console'],
            'level': 'INFO',
            'propagate': False,
        },
    },
}
