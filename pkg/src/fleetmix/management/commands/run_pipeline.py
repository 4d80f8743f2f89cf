"""
Run several stages with one configuration.

Without --stages the full experiment runs: instance (or ingestion),
scenarios, optional reduction, route pool for the path model, solve,
measures and report.

Usage:
    python manage.py run_pipeline --config experiment.json
    python manage.py run_pipeline --stages gen_instance,gen_scenarios,solve -o runs/demo
"""

from django.core.management.base import CommandError

from fleetmix.management.base import ARGUMENT_GROUPS, PipelineCommand
from fleetmix.pipeline import STAGES


class Command(PipelineCommand):
    help = "Run a chain of pipeline stages"
    argument_groups = tuple(ARGUMENT_GROUPS)

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--stages",
            help=f"Comma-separated stages out of {', '.join(STAGES)}",
        )

    def get_stages(self, options) -> tuple[str, ...]:
        if not options.get("stages"):
            return ()
        stages = tuple(s.strip() for s in options["stages"].split(",") if s.strip())
        unknown = [s for s in stages if s not in STAGES]
        if unknown:
            raise CommandError(f"Unknown stages: {', '.join(unknown)}")
        return stages
