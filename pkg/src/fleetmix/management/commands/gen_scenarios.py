"""
Perturb the base demand of an instance into equiprobable scenarios.

Usage:
    python manage.py gen_scenarios --n-scenarios 10 -o runs/demo
"""

from fleetmix.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Generate demand scenarios (scenarios.csv) for an instance"
    stages = ("gen_scenarios",)
    argument_groups = ("inputs", "scenarios")
