from .base import *  # noqa
from .base import env

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#secret-key
SECRET_KEY = env("DJANGO_SECRET_KEY")
# https://docs.djangoproject.com/en/dev/ref/settings/#allowed-hosts
ALLOWED_HOSTS = env.list("DJANGO_ALLOWED_HOSTS", default=[])

# Your stuff...
# ------------------------------------------------------------------------------
# Batch runs on shared hosts default to all but one core.
HYBRID_THREADS = env.int("HYBRID_THREADS", default=max(1, (os.cpu_count() or 2) - 1))  # noqa F405
