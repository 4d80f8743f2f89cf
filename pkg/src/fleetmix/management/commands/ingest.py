"""
Build an instance and day scenarios from operational parcel counts.

Usage:
    python manage.py ingest --csv counts.csv --coverage 0.95 -o runs/city
"""

from fleetmix.management.base import PipelineCommand


class Command(PipelineCommand):
    help = "Ingest an operational CSV into instance.json and scenarios.csv"
    stages = ("ingest",)
    argument_groups = ("ingest", "scenarios")

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--depot", nargs=2, type=float, metavar=("X", "Y"), help="Depot coordinates (km)")
