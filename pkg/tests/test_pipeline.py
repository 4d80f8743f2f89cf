"""
Tests for run configuration and stage orchestration.
"""

import json

import pytest

from fleetmix.artifacts import read_json, save_instance, save_scenarios
from fleetmix.models import ExperimentRun, RunStatus
from fleetmix.pipeline import (
    ERROR_FILE,
    MANIFEST_FILE,
    ConfigError,
    InputFileError,
    RunConfig,
    build_run_config,
    default_chain,
    run_pipeline,
)

from .test_instancegen import LONG_CSV

SMALL_RUN = {"n_requests": 3, "n_scenarios": 2, "backend": "highs", "gap": 1e-9}


def small_config(tmp_path, **overrides) -> RunConfig:
    return build_run_config(overrides={"output_dir": str(tmp_path), **SMALL_RUN, **overrides})


class TestRunConfig:
    def test_settings_provide_defaults(self):
        config = build_run_config()
        assert config.time_limit == 60.0
        assert config.output_dir == "test-runs"
        assert config.n_requests == 10
        assert config.n_scenarios == 5

    def test_file_then_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"seed": 4, "n_scenarios": 7, "stability_sizes": [2, 4]}))
        config = build_run_config(path, {"seed": 9, "radius": None})
        assert config.seed == 9
        assert config.n_scenarios == 7
        assert config.stability_sizes == (2, 4)
        assert config.radius is None

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(InputFileError) as excinfo:
            build_run_config(tmp_path / "missing.json")
        assert excinfo.value.exit_code == 2

    def test_unknown_keys(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"colour": "blue"}')
        with pytest.raises(ConfigError, match="colour"):
            build_run_config(path)

    def test_config_must_be_an_object(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            build_run_config(path)

    @pytest.mark.parametrize(
        "overrides",
        [
            {"backend": "cplex"},
            {"model": "arc"},
            {"threads": 0},
            {"time_limit": 0},
            {"reduce_to": 0},
            {"method": "ks", "model": "node"},
        ],
    )
    def test_invalid_options(self, overrides):
        with pytest.raises(ConfigError):
            build_run_config(overrides=overrides)

    def test_costs_follow_the_profile_with_overrides(self):
        config = build_run_config(overrides={"gamma": 50.0, "recourse_cost_mode": "flat"})
        costs = config.costs
        assert costs.gamma == 50.0
        assert costs.recourse_cost_mode.value == "flat"
        assert costs.beta == config.fleet_profile.costs.beta

    def test_ks_config(self):
        config = build_run_config(overrides={"model": "path", "method": "ks", "bucket_size": 7, "seed": 3})
        assert config.ks_config.bucket_size == 7
        assert config.ks_config.seed == 3
        assert config.ks_config.t_max == config.time_limit


class TestDefaultChain:
    def test_synthetic_node_run(self):
        assert default_chain(RunConfig()) == ("gen_instance", "gen_scenarios", "solve", "measures", "report")

    def test_operational_path_run_with_reduction(self):
        config = RunConfig(operational_csv="days.csv", reduce_to=2, model="path")
        assert default_chain(config) == ("ingest", "reduce_scenarios", "gen_routes", "solve", "measures", "report")


class TestRunPipeline:
    """Stage chains against a temporary output directory."""

    def test_full_chain(self, tmp_path):
        result = run_pipeline(small_config(tmp_path))
        assert result.ok, result.error
        assert {"instance", "scenarios", "solution", "report", "summary", "routes"} <= set(result.artifacts)
        for file_name in result.artifacts.values():
            assert (tmp_path / file_name).is_file()
        summary = read_json(tmp_path / "summary.json")
        assert summary["objective"] == pytest.approx(result.objective, abs=1e-9)
        assert summary["measures"]["violations"] == []

    def test_manifest_records_producers(self, tmp_path):
        run_pipeline(small_config(tmp_path), ["gen_instance"])
        run_pipeline(small_config(tmp_path, n_scenarios=3), ["gen_scenarios"])
        manifest = read_json(tmp_path / MANIFEST_FILE)
        artifacts = manifest["artifacts"]
        assert artifacts["instance"]["stage"] == "gen_instance"
        assert artifacts["scenarios"]["stage"] == "gen_scenarios"
        assert artifacts["scenarios"]["config"]["n_scenarios"] == 3
        assert manifest["prng"] == "numpy.random.PCG64"
        assert "numpy" in manifest["versions"]

    def test_same_config_same_bytes(self, tmp_path):
        first, second = tmp_path / "first", tmp_path / "second"
        run_pipeline(small_config(first))
        result = run_pipeline(small_config(second))
        assert result.ok
        for file_name in result.artifacts.values():
            assert (first / file_name).read_bytes() == (second / file_name).read_bytes(), file_name

    def test_path_model_with_kernel_search(self, tmp_path):
        config = small_config(tmp_path, model="path", method="ks", enumerate=True, bucket_size=2)
        result = run_pipeline(config, ["gen_instance", "gen_scenarios", "gen_routes", "solve", "report"])
        assert result.ok, result.error
        assert "ks_trace" in result.artifacts
        header = (tmp_path / "ks_trace.csv").read_text().splitlines()[0]
        assert "elapsed" not in header

    def test_exact_path_matches_node(self, tmp_path):
        stages = ["gen_instance", "gen_scenarios", "solve"]
        node = run_pipeline(small_config(tmp_path / "node"), stages)
        path = run_pipeline(
            small_config(tmp_path / "path", model="path", enumerate=True),
            ["gen_instance", "gen_scenarios", "gen_routes", "solve"],
        )
        assert path.objective == pytest.approx(node.objective, abs=1e-6)

    def test_reduction_feeds_later_stages(self, tmp_path):
        config = small_config(tmp_path, n_scenarios=4, reduce_to=2)
        result = run_pipeline(config, ["gen_instance", "gen_scenarios", "reduce_scenarios", "solve"])
        assert result.ok, result.error
        assert read_json(tmp_path / "reduction.json")["k"] == 2
        assert len(read_json(tmp_path / "solution.json")["scenarios"]) == 2

    def test_ingest_operational_days(self, tmp_path):
        csv = tmp_path / "days.csv"
        csv.write_text(LONG_CSV)
        result = run_pipeline(small_config(tmp_path, operational_csv=str(csv)), ["ingest", "solve"])
        assert result.ok, result.error
        assert read_json(tmp_path / "ingest_report.json")
        assert (tmp_path / "scenarios.csv").read_text().count("\n") == 3

    def test_ingest_needs_a_csv(self, tmp_path):
        result = run_pipeline(small_config(tmp_path), ["ingest"])
        assert result.exit_code == 1
        assert isinstance(result.error, ConfigError)

    def test_missing_input_file(self, tmp_path, tiny_instance):
        save_instance(tmp_path / "instance.json", tiny_instance)
        result = run_pipeline(small_config(tmp_path), ["solve"])
        assert result.exit_code == 2
        error = read_json(tmp_path / ERROR_FILE)
        assert error["stage"] == "solve"
        assert error["path"].endswith("scenarios.csv")

    def test_error_file_is_removed_after_success(self, tmp_path, tiny_instance, tiny_scenarios):
        save_instance(tmp_path / "instance.json", tiny_instance)
        assert run_pipeline(small_config(tmp_path), ["solve"]).exit_code == 2
        save_scenarios(tmp_path / "scenarios.csv", tiny_scenarios)
        assert run_pipeline(small_config(tmp_path), ["solve"]).ok
        assert not (tmp_path / ERROR_FILE).exists()

    def test_failed_run_keeps_earlier_artifacts_in_the_manifest(self, tmp_path):
        result = run_pipeline(small_config(tmp_path), ["gen_instance", "gen_scenarios", "report"])
        assert result.exit_code == 2
        manifest = read_json(tmp_path / MANIFEST_FILE)
        assert set(manifest["artifacts"]) == {"instance", "scenarios"}
        assert manifest["failure"]["stage"] == "report"
        assert manifest["failure"]["error"] == "InputFileError"

        assert run_pipeline(small_config(tmp_path), ["solve"]).ok
        manifest = read_json(tmp_path / MANIFEST_FILE)
        assert "failure" not in manifest
        assert {"instance", "scenarios", "solution"} <= set(manifest["artifacts"])

    def test_report_needs_matching_scenarios(self, tmp_path, tiny_instance, tiny_scenarios):
        save_instance(tmp_path / "instance.json", tiny_instance)
        save_scenarios(tmp_path / "scenarios.csv", tiny_scenarios)
        assert run_pipeline(small_config(tmp_path), ["solve"]).ok
        save_scenarios(tmp_path / "scenarios.csv", tiny_scenarios.single(0))
        result = run_pipeline(small_config(tmp_path), ["report"])
        assert result.exit_code == 1
        assert "scenarios" in str(result.error)

    def test_unknown_stage(self, tmp_path):
        result = run_pipeline(small_config(tmp_path), ["gen_instance", "plot"])
        assert isinstance(result.error, ConfigError)
        assert not (tmp_path / MANIFEST_FILE).exists()

    def test_stability(self, tmp_path, tiny_instance, tiny_scenarios):
        save_instance(tmp_path / "instance.json", tiny_instance)
        save_scenarios(tmp_path / "scenarios.csv", tiny_scenarios)
        config = small_config(tmp_path, stability_sizes=(1, 2), stability_runs=2)
        result = run_pipeline(config, ["stability"])
        assert result.ok, result.error
        stability = read_json(tmp_path / "stability.json")
        assert stability["sizes"] == [1, 2]
        assert len(stability["spread"]) == 2


@pytest.mark.django_db
class TestRunLedger:
    def test_successful_run_is_recorded(self, tmp_path, settings):
        settings.FLEETMIX_RECORD_RUNS = True
        result = run_pipeline(small_config(tmp_path), ["gen_instance", "gen_scenarios", "solve"])
        run = ExperimentRun.objects.get()
        assert run.status == RunStatus.SUCCESS
        assert run.stage == "gen_instance..solve"
        assert run.objective == pytest.approx(result.objective)
        assert run.artifacts["solution"] == "solution.json"

    def test_failed_run_is_recorded(self, tmp_path, settings):
        settings.FLEETMIX_RECORD_RUNS = True
        run_pipeline(small_config(tmp_path), ["solve"])
        run = ExperimentRun.objects.get()
        assert run.status == RunStatus.FAILED
        assert "not found" in run.error_message

    def test_recording_is_off_by_default(self, tmp_path):
        run_pipeline(small_config(tmp_path), ["gen_instance"])
        assert ExperimentRun.objects.count() == 0
