"""
Stage orchestration for the management commands.

A run resolves one ``RunConfig`` and executes a chain of stages against an
output directory. Each stage reads its inputs either from an explicit path
in the config or from the artifacts an earlier stage left in the output
directory, and every artifact it writes is entered in ``manifest.json``
together with the config that produced it.
"""

import logging
import platform
from collections.abc import Callable, Iterable
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import metadata
from pathlib import Path

import django
import numpy as np
import pandas as pd
import scipy
from django.conf import settings

from .artifacts import (
    ArtifactError,
    load_grid,
    load_instance,
    load_plan,
    load_pool,
    load_scenarios,
    read_json,
    save_grid,
    save_instance,
    save_plan,
    save_pool,
    save_scenarios,
    write_csv,
    write_json,
)
from .domain import (
    PROFILES,
    CostParams,
    Instance,
    RecourseCostMode,
    ScenarioSet,
    TravelCostMode,
    build_neighborhoods,
    get_profile,
)
from .instancegen import (
    PRNG_ALGORITHM,
    GenConfig,
    generate_synthetic,
    ingest_operational,
    perturb_demand,
    synthetic_density_grid,
)
from .kernelsearch import KsConfig, kernel_search
from .measures import expected_value_solution, fleet_comparison, in_sample_stability, measure_suite, wait_and_see
from .mip import Backend, MipError, PlanSolution, SolveLimits
from .planning import ModelKind, PlanningProblem, PlanOutcome
from .routegen import AlnsConfig, RoutePool, build_route_pool, enumerate_routes
from .scenred import fast_forward_select

logger = logging.getLogger(__name__)

STAGES = (
    "gen_instance",
    "gen_scenarios",
    "ingest",
    "reduce_scenarios",
    "gen_routes",
    "solve",
    "measures",
    "stability",
    "report",
)

ARTIFACT_FILES = {
    "instance": "instance.json",
    "grid": "grid.json",
    "scenarios": "scenarios.csv",
    "ingest_report": "ingest_report.json",
    "reduced_scenarios": "scenarios_reduced.csv",
    "reduction": "reduction.json",
    "pool": "pool.json",
    "solution": "solution.json",
    "ks_trace": "ks_trace.csv",
    "report": "report.json",
    "fleet_comparison": "fleet_comparison.csv",
    "stability_runs": "stability_runs.csv",
    "stability_summary": "stability_summary.csv",
    "stability": "stability.json",
    "recourse_stats": "recourse_stats.csv",
    "routes": "routes.csv",
    "summary": "summary.json",
}

MANIFEST_FILE = "manifest.json"
ERROR_FILE = "error.json"

METHODS = ("exact", "ks")


class PipelineError(Exception):
    """A pipeline stage failed; carries the process exit code."""

    exit_code = 1

    def __init__(self, message: str, stage: str | None = None, path: str | None = None, kind: str | None = None):
        super().__init__(message)
        self.stage = stage
        self.path = path
        self.kind = kind or type(self).__name__

    def to_dict(self) -> dict:
        return {
            "error": self.kind,
            "message": str(self),
            "exit_code": self.exit_code,
            "stage": self.stage,
            "path": self.path,
        }


class ConfigError(PipelineError):
    """Run options are invalid or inconsistent."""

    pass


class InputFileError(PipelineError):
    """An input file is missing or cannot be read."""

    exit_code = 2


def _get_setting(name: str, default):
    return getattr(settings, name, default)


@dataclass(frozen=True)
class RunConfig:
    """All options of a run. ``None`` cost and radius options fall back to the profile."""

    output_dir: str = "runs"
    seed: int = 0
    time_limit: float = 600.0
    gap: float = 1e-6
    backend: str = Backend.INTERNAL.value
    threads: int = 1
    profile: str = "small"
    # instance generation
    n_requests: int = 10
    grid: str | None = None
    grid_radius: float = 3.0
    cell_size: float = 0.5
    hotspots: int = 3
    depot: tuple[float, float] | None = None
    # demand scenarios
    n_scenarios: int = 5
    noise_low: float = 0.0
    noise_high: float = 4.0
    round_demand: bool = False
    # operational data
    operational_csv: str | None = None
    coverage: float = 1.0
    ingest_cell_size: float | None = None
    reduce_to: int | None = None
    # neighborhoods and costs
    radius: float | None = None
    in_radius: float | None = None
    beta: float | None = None
    gamma: float | None = None
    recourse_unit_cost: float | None = None
    recourse_cost_mode: str | None = None
    travel_cost_mode: str | None = None
    # route pool
    pool_size: int = 200
    n_starts: int = 10
    alns_iterations: int = 5000
    enumerate: bool = False
    # solving
    model: str = ModelKind.NODE.value
    method: str = "exact"
    valid_ineq: bool = True
    bucket_size: int = 50
    opt_threshold: float = 0.0
    subproblem_time: float | None = None
    ks_cycles: int = 2
    # stability
    stability_sizes: tuple[int, ...] = (5, 10, 20)
    stability_runs: int = 5
    # explicit inputs
    instance: str | None = None
    scenarios: str | None = None
    pool: str | None = None
    solution: str | None = None

    def __post_init__(self):
        choices = {
            "profile": sorted(PROFILES),
            "backend": [b.value for b in Backend],
            "model": [k.value for k in ModelKind],
            "method": list(METHODS),
            "recourse_cost_mode": [None] + [m.value for m in RecourseCostMode],
            "travel_cost_mode": [None] + [m.value for m in TravelCostMode],
        }
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.threads < 1:
            raise ConfigError(f"threads must be at least 1, got {self.threads}")
        if self.time_limit <= 0:
            raise ConfigError(f"time_limit must be positive, got {self.time_limit}")
        if self.reduce_to is not None and self.reduce_to < 1:
            raise ConfigError(f"reduce_to must be positive, got {self.reduce_to}")
        if self.method == "ks" and self.model != ModelKind.PATH.value:
            raise ConfigError("Kernel Search runs on the path model; use --model path")

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    @classmethod
    def setting_defaults(cls) -> dict:
        return {
            "backend": _get_setting("FLEETMIX_BACKEND", Backend.INTERNAL.value),
            "time_limit": float(_get_setting("FLEETMIX_TIME_LIMIT", 600.0)),
            "gap": float(_get_setting("FLEETMIX_MIP_GAP", 1e-6)),
            "seed": int(_get_setting("FLEETMIX_SEED", 0)),
            "threads": int(_get_setting("FLEETMIX_THREADS", 1)),
            "output_dir": str(_get_setting("FLEETMIX_OUTPUT_DIR", "runs")),
        }

    def to_dict(self) -> dict:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data

    @property
    def fleet_profile(self):
        return get_profile(self.profile)

    @property
    def costs(self) -> CostParams:
        base = self.fleet_profile.costs
        overrides: dict = {
            name: getattr(self, name)
            for name in ("beta", "gamma", "recourse_unit_cost")
            if getattr(self, name) is not None
        }
        if self.recourse_cost_mode is not None:
            overrides["recourse_cost_mode"] = RecourseCostMode(self.recourse_cost_mode)
        if self.travel_cost_mode is not None:
            overrides["travel_cost_mode"] = TravelCostMode(self.travel_cost_mode)
        return replace(base, **overrides)

    @property
    def limits(self) -> SolveLimits:
        return SolveLimits(time_limit=self.time_limit, gap=self.gap)

    @property
    def ks_config(self) -> KsConfig:
        return KsConfig(
            bucket_size=self.bucket_size,
            t_max=self.time_limit,
            opt_threshold=self.opt_threshold,
            subproblem_time=self.subproblem_time,
            seed=self.seed,
            cycles=self.ks_cycles,
            backend=self.backend,
            gap=self.gap,
        )


def _normalize(data: dict) -> dict:
    for key in ("depot", "stability_sizes"):
        if isinstance(data.get(key), list):
            data[key] = tuple(data[key])
    return data


def build_run_config(config_file: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Django settings, then the JSON config file, then explicit overrides."""
    data = RunConfig.setting_defaults()
    if config_file is not None:
        path = Path(config_file)
        if not path.is_file():
            raise InputFileError(f"Config file not found: {path}", path=str(path))
        try:
            loaded = read_json(path)
        except ArtifactError as e:
            raise InputFileError(str(e), path=str(path)) from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path} must hold a JSON object", path=str(path))
        unknown = sorted(set(loaded) - RunConfig.field_names())
        if unknown:
            raise ConfigError(f"Unknown config keys in {path}: {unknown}", path=str(path))
        data.update(loaded)
    for key, value in (overrides or {}).items():
        if key not in RunConfig.field_names():
            raise ConfigError(f"Unknown option {key!r}")
        if value is not None:
            data[key] = value
    try:
        return RunConfig(**_normalize(data))
    except TypeError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


def collect_versions() -> dict[str, str]:
    try:
        fleetmix_version = metadata.version("fleetmix")
    except metadata.PackageNotFoundError:
        fleetmix_version = "unknown"
    return {
        "fleetmix": fleetmix_version,
        "django": django.get_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


@dataclass
class RunContext:
    config: RunConfig
    output: Path
    stage: str = ""
    written: dict[str, str] = field(default_factory=dict)
    instance: Instance | None = None
    scenarios: ScenarioSet | None = None
    pool: RoutePool | None = None
    plan: PlanSolution | None = None
    rp: PlanOutcome | None = None

    def artifact(self, name: str) -> Path:
        """Path for a new artifact; the current stage is recorded as its producer."""
        self.written[name] = self.stage
        return self.output / ARTIFACT_FILES[name]

    def _input(self, explicit: str | None, *names: str) -> Path:
        if explicit is not None:
            path = Path(explicit)
        else:
            candidates = [self.output / ARTIFACT_FILES[name] for name in names]
            path = next((p for p in candidates if p.is_file()), candidates[-1])
        if not path.is_file():
            raise InputFileError(f"Input file not found: {path}", path=str(path))
        return path

    def _load(self, path: Path, loader: Callable, *args):
        try:
            return loader(path, *args)
        except ArtifactError as e:
            raise InputFileError(str(e), path=str(path)) from e

    def get_instance(self) -> Instance:
        if self.instance is None:
            self.instance = self._load(self._input(self.config.instance, "instance"), load_instance)
        return self.instance

    def get_scenarios(self) -> ScenarioSet:
        if self.scenarios is None:
            instance = self.get_instance()
            path = self._input(self.config.scenarios, "reduced_scenarios", "scenarios")
            self.scenarios = self._load(path, load_scenarios, instance)
        return self.scenarios

    def get_pool(self) -> RoutePool:
        if self.pool is None:
            self.pool = self._load(self._input(self.config.pool, "pool"), load_pool, self.get_instance())
        return self.pool

    def get_plan(self) -> PlanSolution:
        if self.plan is None:
            self.plan = self._load(self._input(self.config.solution, "solution"), load_plan, self.get_instance())
        return self.plan

    def problem(self) -> PlanningProblem:
        cfg = self.config
        instance = self.get_instance()
        radius = cfg.radius if cfg.radius is not None else cfg.fleet_profile.radius
        neighborhoods = build_neighborhoods(instance, radius, cfg.in_radius)
        costs = cfg.costs
        costs.check_dominance(neighborhoods)
        kind = ModelKind(cfg.model)
        return PlanningProblem(
            instance=instance,
            scenarios=self.get_scenarios(),
            neighborhoods=neighborhoods,
            costs=costs,
            model_kind=kind,
            pool=self.get_pool() if kind is ModelKind.PATH else None,
            with_valid_ineq=cfg.valid_ineq,
        )


def stage_gen_instance(ctx: RunContext) -> None:
    cfg = ctx.config
    profile = cfg.fleet_profile
    if cfg.grid is not None:
        grid = ctx._load(ctx._input(cfg.grid), load_grid)
    else:
        grid = synthetic_density_grid(cfg.grid_radius, cfg.cell_size, cfg.hotspots, cfg.seed)
        save_grid(ctx.artifact("grid"), grid)
    gen = GenConfig(n_requests=cfg.n_requests, seed=cfg.seed, depot=cfg.depot)
    instance = generate_synthetic(
        grid, gen, profile.vehicle_types, profile.shift_limit, name=f"synthetic-{profile.name}-{cfg.seed}"
    )
    save_instance(ctx.artifact("instance"), instance)
    ctx.instance = instance


def stage_gen_scenarios(ctx: RunContext) -> None:
    cfg = ctx.config
    instance = ctx.get_instance()
    gen = GenConfig(
        n_requests=max(1, int(instance.base_demands.sum())),
        n_scenarios=cfg.n_scenarios,
        noise_low=cfg.noise_low,
        noise_high=cfg.noise_high,
        seed=cfg.seed,
        round_demand=cfg.round_demand,
    )
    ctx.scenarios = perturb_demand(instance, gen)
    save_scenarios(ctx.artifact("scenarios"), ctx.scenarios)


def stage_ingest(ctx: RunContext) -> None:
    cfg = ctx.config
    if cfg.operational_csv is None:
        raise ConfigError("Ingestion needs an operational CSV (--csv)")
    path = ctx._input(cfg.operational_csv)
    profile = cfg.fleet_profile
    instance, scenarios, report = ingest_operational(
        path,
        profile.vehicle_types,
        profile.shift_limit,
        cell_size=cfg.ingest_cell_size,
        coverage=cfg.coverage,
        depot=cfg.depot,
        round_demand=cfg.round_demand,
    )
    save_instance(ctx.artifact("instance"), instance)
    save_scenarios(ctx.artifact("scenarios"), scenarios)
    write_json(ctx.artifact("ingest_report"), report.to_dict())
    ctx.instance, ctx.scenarios = instance, scenarios


def stage_reduce_scenarios(ctx: RunContext) -> None:
    cfg = ctx.config
    if cfg.reduce_to is None:
        raise ConfigError("Scenario reduction needs a target count (--k)")
    scenarios = ctx.get_scenarios()
    tree = fast_forward_select(scenarios, cfg.reduce_to)
    reduced = tree.apply(scenarios)
    save_scenarios(ctx.artifact("reduced_scenarios"), reduced)
    write_json(ctx.artifact("reduction"), {"k": cfg.reduce_to, "original": scenarios.n_scenarios, **tree.to_dict()})
    ctx.scenarios = reduced


def stage_gen_routes(ctx: RunContext) -> None:
    cfg = ctx.config
    instance = ctx.get_instance()
    if cfg.enumerate:
        pool = enumerate_routes(instance)
    else:
        pool = build_route_pool(
            instance,
            ctx.get_scenarios(),
            pool_size=cfg.pool_size,
            n_starts=cfg.n_starts,
            seed=cfg.seed,
            config=AlnsConfig(iterations=cfg.alns_iterations),
            workers=cfg.threads,
        )
    save_pool(ctx.artifact("pool"), pool)
    ctx.pool = pool


def _solver_info(outcome: PlanOutcome) -> dict:
    raw = outcome.raw
    return {
        "status": raw.status.value,
        "best_bound": round(raw.best_bound, 10),
        "gap": round(raw.gap, 10),
    }


def stage_solve(ctx: RunContext) -> None:
    cfg = ctx.config
    problem = ctx.problem()
    extra = {"model": cfg.model, "method": cfg.method}
    if cfg.method == "ks":
        plan, trace = kernel_search(
            problem.instance,
            problem.scenarios,
            problem.neighborhoods,
            problem.costs,
            problem.pool,
            cfg.ks_config,
        )
        # elapsed times vary between runs and stay in the log
        write_csv(ctx.artifact("ks_trace"), trace.to_rows(with_elapsed=False))
    else:
        outcome = problem.solve(cfg.backend, cfg.limits)
        if outcome.plan is None:
            raise PipelineError(f"Solve ended with status {outcome.raw.status.value} and no plan")
        plan = outcome.plan
        extra["solver"] = _solver_info(outcome)
        ctx.rp = outcome
    problems = plan.check_invariants(problem.instance)
    if problems:
        raise PipelineError(f"Decoded plan violates its invariants: {problems}")
    save_plan(ctx.artifact("solution"), plan, extra)
    ctx.plan = plan
    logger.info(f"Solved {cfg.model}/{cfg.method}: objective {plan.objective:.6f}, fleet {plan.fleet}")


def stage_measures(ctx: RunContext) -> None:
    cfg = ctx.config
    problem = ctx.problem()
    rp = ctx.rp
    if rp is None or rp.plan is None:
        rp = problem.solve(cfg.backend, cfg.limits)
        if rp.plan is None:
            raise PipelineError(f"Recourse problem ended with status {rp.raw.status.value} and no plan")
    ev = expected_value_solution(problem, cfg.backend, cfg.limits)
    ws = wait_and_see(problem, cfg.backend, cfg.limits, workers=cfg.threads)
    report = measure_suite(problem, rp, cfg.backend, cfg.limits, ev=ev, ws=ws, workers=cfg.threads)
    write_json(ctx.artifact("report"), {"model": cfg.model, **report.to_dict()})
    write_csv(ctx.artifact("fleet_comparison"), fleet_comparison(problem, rp, ws))


def stage_stability(ctx: RunContext) -> None:
    cfg = ctx.config
    problem = ctx.problem()
    result = in_sample_stability(
        problem,
        list(cfg.stability_sizes),
        cfg.stability_runs,
        seed=cfg.seed,
        noise=(cfg.noise_low, cfg.noise_high),
        backend=cfg.backend,
        limits=cfg.limits,
        ks_config=cfg.ks_config if cfg.method == "ks" else None,
    )
    write_csv(ctx.artifact("stability_runs"), result.runs)
    write_csv(ctx.artifact("stability_summary"), result.summary)
    write_json(
        ctx.artifact("stability"),
        {
            "sizes": list(cfg.stability_sizes),
            "runs": cfg.stability_runs,
            "spread": [round(float(v), 10) for v in result.summary["spread"]],
            "trend_ok": result.trend_ok,
        },
    )


def stage_report(ctx: RunContext) -> None:
    instance = ctx.get_instance()
    scenarios = ctx.get_scenarios()
    plan = ctx.get_plan()
    if plan.n_scenarios != scenarios.n_scenarios:
        raise PipelineError(
            f"Plan covers {plan.n_scenarios} scenarios but the scenario file has {scenarios.n_scenarios}"
        )
    write_csv(ctx.artifact("recourse_stats"), plan.recourse_statistics(instance, scenarios))
    routes = [
        {
            "route": k,
            "vehicle_type": planned.vehicle_type,
            "sequence": "-".join(str(i) for i in (0, *planned.sequence, 0)),
            "length": round(planned.route.length, 10),
            "mean_load": round(float(np.dot(scenarios.probabilities, plan.loads[:, k])), 10),
            "max_duration": round(float(plan.durations[:, k].max()), 10),
        }
        for k, planned in enumerate(plan.routes)
    ]
    columns = ["route", "vehicle_type", "sequence", "length", "mean_load", "max_duration"]
    write_csv(ctx.artifact("routes"), pd.DataFrame(routes, columns=columns))
    summary = {
        "objective": round(plan.objective, 10),
        "status": plan.status,
        "fleet": plan.fleet_counts([p.id for p in instance.vehicle_types]),
        "costs": plan.costs.to_dict(),
        "distance_by_type": {k: round(v, 10) for k, v in plan.distance_by_type().items()},
    }
    measures_path = ctx.output / ARTIFACT_FILES["report"]
    if measures_path.is_file():
        summary["measures"] = ctx._load(measures_path, read_json)
    write_json(ctx.artifact("summary"), summary)


STAGE_FUNCTIONS: dict[str, Callable[[RunContext], None]] = {
    "gen_instance": stage_gen_instance,
    "gen_scenarios": stage_gen_scenarios,
    "ingest": stage_ingest,
    "reduce_scenarios": stage_reduce_scenarios,
    "gen_routes": stage_gen_routes,
    "solve": stage_solve,
    "measures": stage_measures,
    "stability": stage_stability,
    "report": stage_report,
}


def default_chain(config: RunConfig) -> tuple[str, ...]:
    """Full experiment: optional reduction, and a route pool only for the path model."""
    chain = ["ingest" if config.operational_csv else "gen_instance"]
    if not config.operational_csv:
        chain.append("gen_scenarios")
    if config.reduce_to is not None:
        chain.append("reduce_scenarios")
    if config.model == ModelKind.PATH.value:
        chain.append("gen_routes")
    chain += ["solve", "measures", "report"]
    return tuple(chain)


@dataclass
class PipelineResult:
    exit_code: int
    artifacts: dict[str, str]
    objective: float | None = None
    error: PipelineError | None = None

    @property
    def ok(self) -> bool:
        return self.exit_code == 0


def write_manifest(ctx: RunContext, failure: PipelineError | None = None) -> Path:
    """
    Merge this run's artifacts into the manifest of the output directory.

    A failed run still enters the artifacts its earlier stages wrote and
    records the failing stage under ``failure``; a later successful run
    clears it.
    """
    path = ctx.output / MANIFEST_FILE
    artifacts: dict = {}
    if path.is_file():
        try:
            artifacts = read_json(path).get("artifacts", {})
        except (ArtifactError, AttributeError):
            logger.warning(f"Replacing unreadable manifest {path}")
    config = ctx.config.to_dict()
    for name, stage in ctx.written.items():
        artifacts[name] = {"file": ARTIFACT_FILES[name], "stage": stage, "config": config}
    manifest = {"prng": PRNG_ALGORITHM, "versions": collect_versions(), "artifacts": artifacts}
    if failure is not None:
        manifest["failure"] = {"stage": failure.stage, "error": failure.kind, "message": str(failure)}
    return write_json(path, manifest)


def _record_runs() -> bool:
    return bool(_get_setting("FLEETMIX_RECORD_RUNS", False))


def _start_record(config: RunConfig, chain: tuple[str, ...]):
    if not _record_runs():
        return None
    from .models import ExperimentRun

    label = chain[0] if len(chain) == 1 else f"{chain[0]}..{chain[-1]}"
    run = ExperimentRun.objects.create(stage=label[:50], config=config.to_dict(), output_dir=config.output_dir)
    run.mark_running()
    return run


def _as_pipeline_error(error: Exception, stage: str) -> PipelineError:
    if isinstance(error, PipelineError):
        error.stage = error.stage or stage
        return error
    if isinstance(error, FileNotFoundError):
        return InputFileError(str(error), stage=stage, path=error.filename, kind=type(error).__name__)
    return PipelineError(str(error), stage=stage, kind=type(error).__name__)


def run_pipeline(config: RunConfig, stages: Iterable[str] | None = None) -> PipelineResult:
    """Run ``stages`` in order (the full chain by default) and write the manifest."""
    chain = tuple(stages) if stages else default_chain(config)
    unknown = [s for s in chain if s not in STAGE_FUNCTIONS]
    if unknown:
        error = ConfigError(f"Unknown stages {unknown}; choose from {list(STAGES)}")
        return PipelineResult(exit_code=error.exit_code, artifacts={}, error=error)

    ctx = RunContext(config=config, output=Path(config.output_dir))
    ctx.output.mkdir(parents=True, exist_ok=True)
    record = _start_record(config, chain)
    logger.info(f"Running {' -> '.join(chain)} into {ctx.output}")
    try:
        for stage in chain:
            ctx.stage = stage
            logger.info(f"Stage {stage} started")
            STAGE_FUNCTIONS[stage](ctx)
            logger.info(f"Stage {stage} finished")
    except (PipelineError, ValueError, MipError, OSError) as e:
        error = _as_pipeline_error(e, ctx.stage)
        logger.error(f"Stage {error.stage} failed: {error}")
        try:
            write_json(ctx.output / ERROR_FILE, error.to_dict())
        except OSError as write_error:
            logger.error(f"Could not write {ERROR_FILE}: {write_error}")
        try:
            write_manifest(ctx, failure=error)
        except OSError as write_error:
            logger.error(f"Could not write {MANIFEST_FILE}: {write_error}")
        if record is not None:
            record.mark_failed(str(error))
        return PipelineResult(exit_code=error.exit_code, artifacts=dict(sorted(ctx.written.items())), error=error)

    (ctx.output / ERROR_FILE).unlink(missing_ok=True)
    write_manifest(ctx)
    artifacts = {name: ARTIFACT_FILES[name] for name in sorted(ctx.written)}
    objective = ctx.plan.objective if ctx.plan is not None else None
    if record is not None:
        record.mark_success(artifacts, objective)
    logger.info(f"Run finished with {len(artifacts)} artifacts")
    return PipelineResult(exit_code=0, artifacts=artifacts, objective=objective)
