"""
With these settings, tests run faster.
"""

from .base import *  # noqa
from .base import env

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#secret-key
SECRET_KEY = env(
    "DJANGO_SECRET_KEY",
    default="ETR6CgBurzkX1Tr3zQoIlV9pfW0n5elg1Yy48mWoG9qS123HOIc9wDuHXyKwlyxx",
)
# https://docs.djangoproject.com/en/dev/ref/settings/#test-runner
TEST_RUNNER = "django.test.runner.DiscoverRunner"

# DATABASES
# ------------------------------------------------------------------------------
DATABASES = {"default": {"ENGINE": "django.db.backends.sqlite3", "NAME": ":memory:"}}

# Your stuff...
# ------------------------------------------------------------------------------
HYBRID_THREADS = 1
LOGGING["handlers"]["console"]["level"] = "ERROR"  # noqa F405
