"""
Sample a synthetic instance from a population density grid.

Usage:
    python manage.py gen_instance --n-requests 20 --seed 1 -o runs/demo
"""

from fleetmix.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Generate a synthetic instance (instance.json, grid.json)"
    stages = ("gen_instance",)
    argument_groups = ("instance",)
