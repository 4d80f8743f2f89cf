"""
Shared plumbing for the pipeline management commands.

Every option defaults to ``None`` so that only flags given on the command
line override the JSON config file and the Django settings.
"""

import json
import logging
import sys
from typing import NoReturn

from django.core.management.base import BaseCommand

from fleetmix.pipeline import PipelineError, PipelineResult, RunConfig, build_run_config, run_pipeline

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]


def _add_common(parser):
    parser.add_argument("--config", help="JSON file with run options; flags override it")
    parser.add_argument("--output", "-o", dest="output_dir", help="Output directory for artifacts")
    parser.add_argument("--seed", type=int, help="Master seed for all random streams")
    parser.add_argument("--time-limit", dest="time_limit", type=float, help="Solver time limit in seconds")
    parser.add_argument("--gap", type=float, help="Relative MIP gap")
    parser.add_argument("--backend", choices=["internal", "highs", "mps_external"], help="MIP backend")
    parser.add_argument("--threads", type=int, help="Cap on parallel workers")
    parser.add_argument("--profile", choices=["small", "large"], help="Vehicle and cost profile")
    parser.add_argument("--log-level", dest="log_level", choices=LOG_LEVELS, default=None)


def _add_inputs(parser):
    parser.add_argument("--instance", help="Instance JSON (default: <output>/instance.json)")
    parser.add_argument("--scenarios", help="Scenario CSV (default: reduced or full scenarios in <output>)")
    parser.add_argument("--pool", help="Route pool JSON (default: <output>/pool.json)")


def _add_instance(parser):
    parser.add_argument("--n-requests", dest="n_requests", type=int, help="Requests sampled over the grid")
    parser.add_argument("--grid", help="Density grid JSON; a synthetic grid is used otherwise")
    parser.add_argument("--grid-radius", dest="grid_radius", type=float, help="Synthetic grid radius (km)")
    parser.add_argument("--cell-size", dest="cell_size", type=float, help="Hexagon size (km)")
    parser.add_argument("--hotspots", type=int, help="Population hotspots of the synthetic grid")
    parser.add_argument("--depot", nargs=2, type=float, metavar=("X", "Y"), help="Depot coordinates (km)")


def _add_scenarios(parser):
    parser.add_argument("--n-scenarios", dest="n_scenarios", type=int, help="Number of demand scenarios")
    parser.add_argument("--noise-low", dest="noise_low", type=float, help="Lower demand multiplier")
    parser.add_argument("--noise-high", dest="noise_high", type=float, help="Upper demand multiplier")
    parser.add_argument(
        "--round-demand", dest="round_demand", action="store_true", default=None, help="Round demands"
    )


def _add_ingest(parser):
    parser.add_argument("--csv", dest="operational_csv", help="Operational parcel counts CSV")
    parser.add_argument("--coverage", type=float, help="Demand fraction kept by the location filter")
    parser.add_argument("--ingest-cell-size", dest="ingest_cell_size", type=float, help="Merge into hexagons (km)")


def _add_reduce(parser):
    parser.add_argument("--k", dest="reduce_to", type=int, help="Scenarios kept by fast forward selection")


def _add_routes(parser):
    parser.add_argument("--pool-size", dest="pool_size", type=int, help="Routes kept besides elementary ones")
    parser.add_argument("--n-starts", dest="n_starts", type=int, help="ALNS starts per demand realization")
    parser.add_argument("--alns-iterations", dest="alns_iterations", type=int, help="ALNS iterations per start")
    parser.add_argument(
        "--enumerate", action="store_true", default=None, help="Enumerate every route (small instances)"
    )


def _add_costs(parser):
    parser.add_argument("--radius", type=float, help="Recourse neighborhood radius (km)")
    parser.add_argument("--in-radius", dest="in_radius", type=float, help="Incoming radius recorded with the neighborhoods")
    parser.add_argument("--beta", type=float, help="Recourse cost multiplier")
    parser.add_argument("--gamma", type=float, help="Outsourcing penalty per unit")
    parser.add_argument("--recourse-unit-cost", dest="recourse_unit_cost", type=float, help="Recourse cost per km")
    parser.add_argument("--recourse-cost-mode", dest="recourse_cost_mode", choices=["distance", "flat"])
    parser.add_argument("--travel-cost-mode", dest="travel_cost_mode", choices=["distance", "per_arc"])


def _add_solve(parser):
    parser.add_argument("--model", choices=["node", "path"], help="Formulation")
    parser.add_argument("--method", choices=["exact", "ks"], help="Exact solve or Kernel Search")
    parser.add_argument(
        "--no-valid-ineq", dest="valid_ineq", action="store_false", default=None,
        help="Leave out the valid inequalities of the node model",
    )
    parser.add_argument("--bucket-size", dest="bucket_size", type=int, help="Kernel Search bucket size")
    parser.add_argument("--opt-threshold", dest="opt_threshold", type=float, help="Kernel Search stop gap")
    parser.add_argument("--subproblem-time", dest="subproblem_time", type=float, help="Restricted solve limit")
    parser.add_argument("--ks-cycles", dest="ks_cycles", type=int, help="Passes over the buckets")


def _add_stability(parser):
    parser.add_argument("--sizes", dest="stability_sizes", nargs="+", type=int, help="Scenario set sizes")
    parser.add_argument("--runs", dest="stability_runs", type=int, help="Independent runs per size")


def _add_report(parser):
    parser.add_argument("--solution", help="Solution JSON (default: <output>/solution.json)")


ARGUMENT_GROUPS = {
    "inputs": _add_inputs,
    "instance": _add_instance,
    "scenarios": _add_scenarios,
    "ingest": _add_ingest,
    "reduce": _add_reduce,
    "routes": _add_routes,
    "costs": _add_costs,
    "solve": _add_solve,
    "stability": _add_stability,
    "report": _add_report,
}


class PipelineCommand(BaseCommand):
    """Runs ``stages`` through the pipeline; failures exit with a JSON error on stderr."""

    stages: tuple[str, ...] = ()
    argument_groups: tuple[str, ...] = ()

    def add_arguments(self, parser):
        _add_common(parser)
        for group in self.argument_groups:
            ARGUMENT_GROUPS[group](parser)

    def get_stages(self, options) -> tuple[str, ...]:
        return self.stages

    def config_overrides(self, options) -> dict:
        names = RunConfig.field_names()
        return {key: value for key, value in options.items() if key in names and value is not None}

    def handle(self, *args, **options):
        if options.get("log_level"):
            logging.getLogger("fleetmix").setLevel(options["log_level"])
        try:
            config = build_run_config(options.get("config"), self.config_overrides(options))
        except PipelineError as e:
            self._fail(e)
        result = run_pipeline(config, self.get_stages(options))
        if result.error is not None:
            self._fail(result.error)
        self._report(result, config.output_dir)

    def _report(self, result: PipelineResult, output_dir: str) -> None:
        for name, file_name in result.artifacts.items():
            self.stdout.write(f"  {name}: {output_dir}/{file_name}")
        message = f"Done: {len(result.artifacts)} artifacts in {output_dir}"
        if result.objective is not None:
            message += f", objective {result.objective:.6f}"
        self.stdout.write(self.style.SUCCESS(message))

    def _fail(self, error: PipelineError) -> NoReturn:
        self.stderr.write(json.dumps(error.to_dict(), sort_keys=True))
        sys.exit(error.exit_code)
