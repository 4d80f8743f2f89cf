"""
Build the route pool for the path model.

Usage:
    python manage.py gen_routes --pool-size 200 -o runs/demo
    python manage.py gen_routes --enumerate -o runs/tiny
"""

from fleetmix.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Generate a route pool (pool.json) by ALNS or full enumeration"
    stages = ("gen_routes",)
    argument_groups = ("inputs", "routes")
