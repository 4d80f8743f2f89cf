"""
Summarize a solved plan into tidy tables.

Usage:
    python manage.py report -o runs/demo
"""

from fleetmix.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Write summary.json, routes.csv and recourse_stats.csv for a solution"
    stages = ("report",)
    argument_groups = ("inputs", "report")
