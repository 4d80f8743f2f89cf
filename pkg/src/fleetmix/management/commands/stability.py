"""
In-sample stability of the recourse problem over growing scenario sets.

Usage:
    python manage.py stability --sizes 5 10 20 --runs 5 -o runs/demo
"""

from fleetmix.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Solve independent scenario samples per size and summarize the spread"
    stages = ("stability",)
    argument_groups = ("inputs", "scenarios", "costs", "solve", "stability")
