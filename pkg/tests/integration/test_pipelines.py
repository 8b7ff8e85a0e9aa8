"""
Integration tests running experiments end to end through the runner.
"""

import json

import numpy as np
import pytest

from osdmix.config import RunConfig, reset_settings
from osdmix.core import export, report, runner
from osdmix.utils.errors import InvalidConfigError
from osdmix.utils.json_encoder import sanitize_for_json


def small_config(out, experiment, **sections):
    base = {
        "experiment": experiment,
        "seed": 11,
        "replicas": 400,
        "out_path": str(out),
        "clt": {
            "checkpoints": [16, 32, 64],
            "shuffles": 20,
            "max_points": 200,
            "windows": 4,
            "gaps": [1, 4],
            "cf_replicas": 400,
        },
        "alpha": {"length": 16, "lags": [1, 4]},
        "generator": {"base_exponent": 5, "grid_divisor": 8, "grid_factor": 3.0},
        "osd": {"samples": 400, "step": 0.125, "block_size": 128},
        "verify": {"samples": 400},
    }
    for key, value in sections.items():
        if isinstance(value, dict):
            base.setdefault(key, {}).update(value)
        else:
            base[key] = value
    return RunConfig.model_validate(base)


def _results(rep):
    return sanitize_for_json({"metrics": rep.metrics, "flags": rep.flags})


@pytest.mark.integration
class TestCltPipeline:
    """clt-run from simulation to report."""

    def test_outputs(self, tmp_path):
        rep = runner.run_experiment(small_config(tmp_path, "clt-run"))
        doc = json.loads((tmp_path / "report.json").read_text())
        assert doc["experiment"] == "clt-run"
        assert doc["pass"] == rep.passed
        names = {flag["name"] for flag in doc["flags"]}
        assert {"energy_within_null", "ratio_bound", "schedule_held_out", "cf_bound_gap_1"} <= names

        rows = (tmp_path / "metrics.csv").read_text().splitlines()
        assert rows[0].startswith("n,norm,ratio_bound")
        assert len(rows) == 4

        track = report.load_track(tmp_path / "normalizers.json")
        assert track.checkpoints == [16, 32, 64]
        assert track.regularized

        assert doc["metrics"]["energy_points"] == 200

        breakpoints = rep.metrics["schedule"]
        assert all(b[0] > a[0] and b[1] > a[1] for a, b in zip(breakpoints, breakpoints[1:]))

    def test_chunking_and_workers_do_not_change_results(self, tmp_path, monkeypatch):
        serial = runner.run_experiment(small_config(tmp_path / "a", "clt-run", workers=1))
        monkeypatch.setenv("OSDMIX_EXECUTION__CHUNK_SIZE", "37")
        reset_settings()
        threaded = runner.run_experiment(small_config(tmp_path / "b", "clt-run", workers=3))
        assert _results(serial) == _results(threaded)
        first, second = ((tmp_path / name / "report.json").read_bytes() for name in "ab")
        assert first == second

    def test_json_format_skips_metric_table(self, tmp_path):
        runner.run_experiment(small_config(tmp_path, "clt-run", out_format="json"))
        assert not (tmp_path / "metrics.csv").exists()
        assert (tmp_path / "normalizers.json").exists()

    def test_too_few_replicas(self, tmp_path):
        with pytest.raises(InvalidConfigError, match="100 replicas"):
            runner.run_experiment(small_config(tmp_path, "clt-run", replicas=50))


@pytest.mark.integration
class TestMixingExperiments:
    """simulate-mixing and estimate-alpha."""

    def test_simulate_csv(self, tmp_path):
        config = small_config(tmp_path, "simulate-mixing", process={"length": 8}, replicas=30)
        rep = runner.run_experiment(config)
        lines = (tmp_path / "paths.csv").read_text().splitlines()
        assert lines[0] == "r,t,x1,x2"
        assert len(lines) == 30 * 8 + 1
        assert rep.metrics["data_file"] == "paths.csv"
        assert [f.name for f in rep.flags] == ["stationarity", "stationary_covariance"]

    def test_simulate_binary_matches_generator(self, tmp_path):
        config = small_config(
            tmp_path, "simulate-mixing", process={"length": 6, "variant": "ma"},
            out_format="json", replicas=20,
        )
        runner.run_experiment(config)
        from osdmix.core import mixing

        expected = mixing.generate(config.process_spec(), 6, 20, seed=11)
        np.testing.assert_array_equal(export.read_binary(tmp_path / "paths.osdb"), expected.data)

    def test_alpha_flags_for_iid(self, tmp_path):
        config = small_config(tmp_path, "estimate-alpha", process={"variant": "iid"}, replicas=2000)
        rep = runner.run_experiment(config)
        assert {f.name for f in rep.flags} == {"alpha_range", "alpha_lag_1", "alpha_lag_4"}
        assert rep.passed

    def test_report_bytes_do_not_depend_on_workers(self, tmp_path):
        for name, workers in (("a", 1), ("b", 3)):
            config = small_config(tmp_path / name, "estimate-alpha", replicas=600, workers=workers)
            runner.run_experiment(config)
        first = (tmp_path / "a" / "report.json").read_bytes()
        assert first == (tmp_path / "b" / "report.json").read_bytes()
        doc = json.loads(first)
        assert "workers" not in doc["config"]
        assert "out_path" not in doc["config"]

    def test_alpha_decreasing_for_ar1(self, tmp_path):
        rep = runner.run_experiment(small_config(tmp_path, "estimate-alpha", replicas=2000))
        assert "alpha_decreasing" in {f.name for f in rep.flags}

    def test_alpha_lag_must_fit_path(self, tmp_path):
        config = small_config(tmp_path, "estimate-alpha", alpha={"lags": [16]})
        with pytest.raises(InvalidConfigError, match="exceed every lag"):
            runner.run_experiment(config)


@pytest.mark.integration
class TestGeneratorPipeline:
    """osd-sample, extract-q and verify chained through their files."""

    def test_extract_then_verify(self, tmp_path):
        extract_dir, verify_dir = tmp_path / "extract", tmp_path / "verify"
        rep = runner.run_experiment(
            small_config(extract_dir, "extract-q", process={"variant": "iid"})
        )
        assert set(rep.metrics["c"]) == {"0.9", "0.8", "0.7"}
        doc = json.loads((extract_dir / "q.json").read_text())
        assert set(doc["certificates"]) == {"0.9", "0.8", "0.7"}
        Q = report.load_generator(extract_dir / "q.json")
        assert np.min(np.linalg.eigvals(Q).real) > 0.0

        checked = runner.run_experiment(
            small_config(verify_dir, "verify", verify={"q_file": str(extract_dir / "q.json")})
        )
        np.testing.assert_array_equal(checked.metrics["Q"], Q)
        assert set(checked.metrics["membership_margins"]) == {"0.25", "0.5", "1", "2", "4"}

    def test_extract_reuses_normalizers(self, tmp_path):
        first = runner.run_experiment(small_config(tmp_path / "a", "extract-q"))
        track_file = tmp_path / "a" / "normalizers.json"
        second = runner.run_experiment(
            small_config(tmp_path / "b", "extract-q", generator={"normalizers": str(track_file)})
        )
        assert not (tmp_path / "b" / "normalizers.json").exists()
        assert _results(first) == _results(second)

    def test_osd_sample_feeds_verify(self, tmp_path):
        sample_dir, verify_dir = tmp_path / "sample", tmp_path / "verify"
        runner.run_experiment(
            small_config(
                sample_dir, "osd-sample", out_format="json",
                levy={"diffusion": [[2.0, 0.0], [0.0, 2.0]]},
            )
        )
        samples = export.read_binary(sample_dir / "samples.osdb")
        assert samples.shape == (400, 1, 2)

        q_file = report.save_generator(np.eye(2), tmp_path / "q.json")
        rep = runner.run_experiment(
            small_config(
                verify_dir, "verify",
                verify={"q_file": str(q_file), "samples_file": str(sample_dir / "samples.osdb")},
            )
        )
        np.testing.assert_allclose(rep.metrics["stationary_cov"], np.eye(2), atol=1e-10)
        assert all(f.passed for f in rep.flags if f.name.startswith("membership_t"))
