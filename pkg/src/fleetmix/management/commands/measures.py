"""
Compute WS, EV, EEV and EIV values and the derived EVPI, VSS and LUDS.

Usage:
    python manage.py measures --model node -o runs/demo
"""

from fleetmix.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Compute stochastic measures (report.json, fleet_comparison.csv)"
    stages = ("measures",)
    argument_groups = ("inputs", "costs", "solve")
