"""
Solve the two-stage fleet planning problem.

Usage:
    python manage.py solve --model node --method exact -o runs/demo
    python manage.py solve --model path --method ks --bucket-size 50 -o runs/demo
"""

from fleetmix.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Solve with the node or path model, exactly or by Kernel Search (solution.json)"
    stages = ("solve",)
    argument_groups = ("inputs", "costs", "solve")
