"""
Reduce a scenario set by fast forward selection.

Usage:
    python manage.py reduce_scenarios --k 5 -o runs/demo
"""

from fleetmix.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Keep k scenarios and redistribute the probabilities of the others"
    stages = ("reduce_scenarios",)
    argument_groups = ("inputs", "reduce")
