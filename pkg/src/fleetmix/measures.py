"""
Stochastic-programming measures around a recourse-problem (RP) solution:
wait-and-see, expected-value plans and their expected cost when fixed or
imposed as lower bounds, and the derived EVPI/VSS/LUDS values.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .instancegen import GenConfig, perturb_demand
from .kernelsearch import KsConfig, kernel_search
from .mip import Backend, MeasureVariant, SolveLimits
from .planning import ModelKind, PlanningProblem, PlanOutcome

logger = logging.getLogger(__name__)

TOL = 1e-6


class MeasuresError(ValueError):
    """Measures cannot be computed for the given inputs."""

    pass


@dataclass(frozen=True, eq=False)
class WaitAndSee:
    value: float
    outcomes: tuple[PlanOutcome, ...]

    @property
    def all_optimal(self) -> bool:
        return all(outcome.is_optimal for outcome in self.outcomes)


def wait_and_see(
    problem: PlanningProblem,
    backend: Backend | str = Backend.INTERNAL,
    limits: SolveLimits | None = None,
    workers: int = 1,
) -> WaitAndSee:
    """Σ_s π_s times the optimum of the deterministic problem of scenario s."""
    scenarios = problem.scenarios

    def run(s: int) -> PlanOutcome:
        return problem.with_scenarios(scenarios.single(s)).solve(backend, limits)

    if workers > 1 and scenarios.n_scenarios > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(run, range(scenarios.n_scenarios)))
    else:
        outcomes = [run(s) for s in range(scenarios.n_scenarios)]
    for s, outcome in enumerate(outcomes):
        if not outcome.raw.has_solution:
            raise MeasuresError(f"Wait-and-see solve for scenario {s} returned {outcome.raw.status.value}")
    value = float(sum(p * o.objective for p, o in zip(scenarios.probabilities, outcomes)))
    logger.info(f"WS = {value:.6f} over {scenarios.n_scenarios} scenarios")
    return WaitAndSee(value=value, outcomes=tuple(outcomes))


def expected_value_solution(
    problem: PlanningProblem,
    backend: Backend | str = Backend.INTERNAL,
    limits: SolveLimits | None = None,
) -> PlanOutcome:
    """Solve the single-scenario problem at the expected demand."""
    outcome = problem.with_scenarios(problem.scenarios.expected()).solve(backend, limits)
    if outcome.plan is None:
        raise MeasuresError(f"Expected-value solve returned {outcome.raw.status.value}")
    logger.info(f"EV = {outcome.objective:.6f}, fleet {outcome.plan.fleet}")
    return outcome


def _pct(value: float, rp: float) -> float:
    return value / rp if rp else 0.0


@dataclass(frozen=True)
class MeasuresReport:
    rp: float
    ev: float
    ws: float
    eev_fr: float
    eev_f: float
    eiv_fr: float
    eiv_f: float
    statuses: dict[str, str] = field(default_factory=dict)
    bounds_only: tuple[str, ...] = ()

    @property
    def evpi(self) -> float:
        return self.rp - self.ws

    @property
    def vss_fr(self) -> float:
        return self.eev_fr - self.rp

    @property
    def vss_f(self) -> float:
        return self.eev_f - self.rp

    @property
    def luds_fr(self) -> float:
        return self.eiv_fr - self.rp

    @property
    def luds_f(self) -> float:
        return self.eiv_f - self.rp

    def violations(self, tol: float = TOL) -> list[str]:
        """Ordering relations between the measures that do not hold."""
        checks = {
            "ws <= rp": self.ws <= self.rp + tol,
            "rp <= eev_f": self.rp <= self.eev_f + tol,
            "rp <= eev_fr": self.rp <= self.eev_fr + tol,
            "rp <= eiv_f": self.rp <= self.eiv_f + tol,
            "eiv_f <= eiv_fr": self.eiv_f <= self.eiv_fr + tol,
            "eiv_fr <= eev_fr": self.eiv_fr <= self.eev_fr + tol,
            "eiv_f <= eev_f": self.eiv_f <= self.eev_f + tol,
            "luds_fr <= vss_fr": self.luds_fr <= self.vss_fr + tol,
            "luds_f <= vss_f": self.luds_f <= self.vss_f + tol,
        }
        for name in ("evpi", "vss_fr", "vss_f", "luds_fr", "luds_f"):
            checks[f"{name} >= 0"] = getattr(self, name) >= -tol
        return [name for name, ok in checks.items() if not ok]

    def to_dict(self) -> dict:
        values = {
            name: round(float(getattr(self, name)), 10) + 0.0
            for name in (
                "rp", "ev", "ws", "eev_fr", "eev_f", "eiv_fr", "eiv_f",
                "evpi", "vss_fr", "vss_f", "luds_fr", "luds_f",
            )
        }
        for name in ("evpi", "vss_fr", "vss_f", "luds_fr", "luds_f"):
            values[f"pct_{name}"] = round(_pct(getattr(self, name), self.rp), 10) + 0.0
        values["statuses"] = dict(sorted(self.statuses.items()))
        values["bounds_only"] = list(self.bounds_only)
        values["violations"] = self.violations() if not self.bounds_only else []
        return values


# measure name -> (variant, derived measures affected when the solve is not optimal)
_VARIANT_MEASURES = {
    "eev_fr": (MeasureVariant.FIX_FIRST_STAGE, ("vss_fr",)),
    "eev_f": (MeasureVariant.FIX_FLEET, ("vss_f",)),
    "eiv_fr": (MeasureVariant.LB_FIRST_STAGE, ("luds_fr",)),
    "eiv_f": (MeasureVariant.LB_FLEET, ("luds_f",)),
}


def measure_suite(
    problem: PlanningProblem,
    rp: PlanOutcome,
    backend: Backend | str = Backend.INTERNAL,
    limits: SolveLimits | None = None,
    ev: PlanOutcome | None = None,
    ws: WaitAndSee | None = None,
    workers: int = 1,
) -> MeasuresReport:
    if rp.plan is None:
        raise MeasuresError("The recourse problem has no solution")
    ev = ev or expected_value_solution(problem, backend, limits)
    ws = ws or wait_and_see(problem, backend, limits, workers)

    def run(item):
        name, (variant, _) = item
        return name, problem.solve(backend, limits, variant=variant, reference=ev.plan)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(_VARIANT_MEASURES))) as executor:
            results = dict(executor.map(run, _VARIANT_MEASURES.items()))
    else:
        results = dict(run(item) for item in _VARIANT_MEASURES.items())

    statuses = {"rp": rp.raw.status.value, "ev": ev.raw.status.value}
    statuses["ws"] = "optimal" if ws.all_optimal else "feasible"
    bounds_only: list[str] = []
    if not rp.is_optimal:
        bounds_only.extend(["rp", "evpi"])
    if not ws.all_optimal:
        bounds_only.extend(["ws", "evpi"])
    for name, (_, derived) in _VARIANT_MEASURES.items():
        outcome = results[name]
        statuses[name] = outcome.raw.status.value
        if not outcome.is_optimal:
            bounds_only.extend([name, *derived])
            logger.warning(f"{name} solve ended {outcome.raw.status.value}: reported as a bound")
        if not math.isfinite(outcome.objective):
            raise MeasuresError(f"{name} solve produced no solution ({outcome.raw.status.value})")

    report = MeasuresReport(
        rp=rp.objective,
        ev=ev.objective,
        ws=ws.value,
        eev_fr=results["eev_fr"].objective,
        eev_f=results["eev_f"].objective,
        eiv_fr=results["eiv_fr"].objective,
        eiv_f=results["eiv_f"].objective,
        statuses=statuses,
        bounds_only=tuple(dict.fromkeys(bounds_only)),
    )
    if not report.bounds_only:
        problems = report.violations()
        if problems:
            logger.error(f"Measure ordering violated: {problems}")
        if results["eiv_fr"].is_optimal and results["eev_fr"].is_optimal:
            if abs(report.eiv_fr - report.eev_fr) <= TOL and abs(report.luds_fr - report.vss_fr) > TOL:
                logger.error("LUDS_FR differs from VSS_FR although EIV_FR equals EEV_FR")
    logger.info(
        f"EVPI={report.evpi:.4f} VSS_FR={report.vss_fr:.4f} VSS_F={report.vss_f:.4f} "
        f"LUDS_FR={report.luds_fr:.4f} LUDS_F={report.luds_f:.4f}"
    )
    return report


def fleet_comparison(problem: PlanningProblem, rp: PlanOutcome, ws: WaitAndSee) -> pd.DataFrame:
    """Per-scenario fleet and distance of the scenario-specific plans next to the stochastic plan."""
    type_ids = [p.id for p in problem.instance.vehicle_types]
    rows = []

    def describe(label: str, scenario, plan) -> dict:
        row = {"plan": label, "scenario": scenario}
        fleet = plan.fleet_counts(type_ids)
        distance = plan.distance_by_type()
        for type_id in type_ids:
            row[f"fleet_{type_id}"] = fleet[type_id]
            row[f"distance_{type_id}"] = round(distance.get(type_id, 0.0), 10)
        return row

    if rp.plan is not None:
        rows.append(describe("stochastic", "", rp.plan))
    for s, outcome in enumerate(ws.outcomes):
        if outcome.plan is not None:
            rows.append(describe("scenario", s, outcome.plan))
    return pd.DataFrame(rows)


@dataclass(frozen=True, eq=False)
class StabilityResult:
    runs: pd.DataFrame
    summary: pd.DataFrame
    trend_ok: bool


def _run_seed(seed: int, size: int, run: int) -> int:
    return int(np.random.SeedSequence([seed, size, run]).generate_state(1)[0])


def spread_trend_ok(spreads: list[float], tol: float = 1e-9) -> bool:
    """At least two thirds of consecutive size steps must not increase the spread."""
    steps = list(zip(spreads, spreads[1:]))
    if not steps:
        return True
    reductions = sum(1 for a, b in steps if b <= a + tol)
    return reductions >= math.ceil(2 * len(steps) / 3)


def in_sample_stability(
    problem: PlanningProblem,
    scenario_sizes: list[int],
    runs: int,
    seed: int = 0,
    noise: tuple[float, float] = (0.0, 4.0),
    backend: Backend | str = Backend.INTERNAL,
    limits: SolveLimits | None = None,
    ks_config: KsConfig | None = None,
) -> StabilityResult:
    """
    Solve the recourse problem on ``runs`` independent scenario sets per size
    and summarize the objective spread. With ``ks_config`` the path model is
    solved by Kernel Search instead of exactly.
    """
    if list(scenario_sizes) != sorted(scenario_sizes) or not scenario_sizes:
        raise MeasuresError(f"Scenario sizes must be a nonempty ascending list, got {scenario_sizes}")
    if runs < 1:
        raise MeasuresError("runs must be positive")
    if ks_config is not None and (ModelKind(problem.model_kind) is not ModelKind.PATH or problem.pool is None):
        raise MeasuresError("Kernel Search stability runs need the path model and a route pool")
    instance = problem.instance
    n_requests = max(1, int(instance.base_demands.sum()))
    rows = []
    for size in scenario_sizes:
        for run in range(runs):
            run_seed = _run_seed(seed, size, run)
            cfg = GenConfig(n_requests, size, noise[0], noise[1], run_seed)
            sampled = problem.with_scenarios(perturb_demand(instance, cfg))
            if ks_config is not None:
                plan, _ = kernel_search(
                    instance, sampled.scenarios, sampled.neighborhoods, sampled.costs, sampled.pool, ks_config
                )
                objective, status = plan.objective, plan.status
            else:
                outcome = sampled.solve(backend, limits)
                objective, status = outcome.objective, outcome.raw.status.value
            rows.append(
                {"size": size, "run": run, "seed": run_seed, "objective": round(objective, 10), "status": status}
            )
            logger.debug(f"Stability size {size} run {run}: {objective:.6f} ({status})")
    frame = pd.DataFrame(rows)
    grouped = frame.groupby("size")["objective"]
    summary = pd.DataFrame(
        {
            "mean": grouped.mean(),
            "std": grouped.std(ddof=0),
            "min": grouped.min(),
            "q1": grouped.quantile(0.25),
            "median": grouped.median(),
            "q3": grouped.quantile(0.75),
            "max": grouped.max(),
        }
    )
    summary["spread"] = summary["max"] - summary["min"]
    summary = summary.reset_index()
    trend_ok = spread_trend_ok(list(summary["spread"]))
    if not trend_ok:
        logger.warning(f"Objective spread does not shrink with the scenario count: {list(summary['spread'])}")
    return StabilityResult(runs=frame, summary=summary, trend_ok=trend_ok)
