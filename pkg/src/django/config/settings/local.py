"""
Local development settings for fleetmix.
"""

from .base import *  # noqa: F401, F403

DEBUG = True

# Verbose solver progress while experimenting
LOGGING["loggers"]["fleetmix"]["level"] = "DEBUG"  # noqa: F405
