"""
Django settings for fleetmix.

Django hosts the management commands, the run ledger and the logging
configuration; there is no web frontend.
"""

from pathlib import Path

import environ

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# Site root is two levels up from BASE_DIR (src/django -> src -> site root)
SITE_ROOT = BASE_DIR.parent.parent

# Load env file - check site root first, then BASE_DIR
env = environ.Env(
    DEBUG=(bool, False),
    FLEETMIX_RECORD_RUNS=(bool, False),
)
env_file = SITE_ROOT / ".env"
if not env_file.exists():
    env_file = BASE_DIR / ".env"
if env_file.exists():
    environ.Env.read_env(str(env_file))

SECRET_KEY = env("SECRET_KEY", default="django-insecure-fleetmix-local-only")

DEBUG = env("DEBUG")

# Application definition
DJANGO_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
]

THIRD_PARTY_APPS: list[str] = []

LOCAL_APPS = [
    "fleetmix.apps.FleetmixConfig",
]

INSTALLED_APPS = DJANGO_APPS + THIRD_PARTY_APPS + LOCAL_APPS

# Database (run ledger only)
DATABASES = {
    "default": env.db("DATABASE_URL", default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}"),
}

# Internationalization
LANGUAGE_CODE = "en-us"
TIME_ZONE = "Europe/Berlin"
USE_I18N = False
USE_TZ = True

# Default primary key field type
DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# Solver and run defaults; command flags and --config files override them
FLEETMIX_BACKEND = env("FLEETMIX_BACKEND", default="internal")
FLEETMIX_TIME_LIMIT = env.float("FLEETMIX_TIME_LIMIT", default=600.0)  # seconds
FLEETMIX_MIP_GAP = env.float("FLEETMIX_MIP_GAP", default=1e-6)
FLEETMIX_SEED = env.int("FLEETMIX_SEED", default=0)
FLEETMIX_THREADS = env.int("FLEETMIX_THREADS", default=1)
FLEETMIX_OUTPUT_DIR = env("FLEETMIX_OUTPUT_DIR", default="runs")

# External MIP solver for the mps_external backend, e.g.
# "highs --model_file {mps} --solution_file {solution} --time_limit {time_limit}"
FLEETMIX_EXTERNAL_SOLVER = env("FLEETMIX_EXTERNAL_SOLVER", default="")
FLEETMIX_EXTERNAL_TIMEOUT = env.float("FLEETMIX_EXTERNAL_TIMEOUT", default=3600.0)  # seconds

# Record each pipeline invocation as an ExperimentRun
FLEETMIX_RECORD_RUNS = env("FLEETMIX_RECORD_RUNS")

# Logging configuration
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {module} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "INFO",
    },
    "loggers": {
        "fleetmix": {
            "handlers": ["console"],
            "level": env("FLEETMIX_LOG_LEVEL", default="INFO"),
            "propagate": False,
        },
    },
}
