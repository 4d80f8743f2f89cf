"""
Test settings for fleetmix.
"""

from .base import *  # noqa: F401, F403

DEBUG = False

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": ":memory:",
    }
}

FLEETMIX_TIME_LIMIT = 60.0
FLEETMIX_SEED = 0
FLEETMIX_THREADS = 1
FLEETMIX_OUTPUT_DIR = "test-runs"
FLEETMIX_EXTERNAL_SOLVER = ""
FLEETMIX_RECORD_RUNS = False

# let pytest's caplog see fleetmix records
LOGGING["loggers"]["fleetmix"]["propagate"] = True  # noqa: F405
