"""Exit codes, artifact schemas and reproducibility of the batch front end.

Everything here runs the real main() in process on deliberately small
ensembles; the numerical content of the artifacts is covered elsewhere.
"""

from __future__ import annotations

import json

import numpy as np
import pytest

from pptrimer.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main


def write_config(path, **overrides):
    config = {
        "params": {"chi": 1e-3, "epsilon": 10.0},
        "integration": {"n_traj": 400, "t_final": 2.0, "master_seed": 3},
        "steady_window": [1.0, 2.0],
    }
    config.update(overrides)
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


SIMULATE_ARTIFACTS = {
    "populations.csv": "t,N1,N1_err,N2,N2_err,N3,N3_err,n_alive",
    "number_stats.csv": "t,F13,F13_err,g2_13,g2_13_err",
    "angle_scan.csv": "theta_deg,VX1,VX1_err,VX2,VX2_err,DS13,DS13_err,EPR13,EPR13_err",
}


class TestSimulate:
    def test_artifacts_and_headers(self, tmp_path):
        cfg = write_config(tmp_path / "c.json")
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_OK
        for name, header in SIMULATE_ARTIFACTS.items():
            lines = (out / name).read_text().splitlines()
            assert lines[0] == header
            assert len(lines) > 1
        report = json.loads((out / "steady_report.json").read_text())
        assert set(report["minima"]) == {"vx1", "vx2", "vx3", "ds", "epr"}
        assert len(report["steady_means"]) == 6
        meta = json.loads((out / "run_meta.json").read_text())
        assert meta["seed"] == 3
        assert meta["diverged_count"] == 0

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path / "c.json")
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert main(["simulate", "--config", cfg, "--out", str(out)]) == EXIT_OK
            outs.append({n: (out / n).read_bytes() for n in SIMULATE_ARTIFACTS})
        assert outs[0] == outs[1]

    def test_cli_overrides_take_effect(self, tmp_path):
        cfg = write_config(tmp_path / "c.json")
        out = tmp_path / "out"
        assert main(["simulate", "--config", cfg, "--out", str(out),
                     "--seed", "99", "--n-traj", "200"]) == EXIT_OK
        meta = json.loads((out / "run_meta.json").read_text())
        assert meta["seed"] == 99
        assert meta["n_traj"] == 200

    def test_missing_config_is_config_error(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "absent.json"),
                     "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_unknown_integration_key_rejected(self, tmp_path):
        cfg = write_config(tmp_path / "c.json",
                           integration={"n_traj": 100, "t_final": 1.0,
                                        "timestep": 0.001})
        assert main(["simulate", "--config", cfg,
                     "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_bad_threads_value_rejected(self, tmp_path):
        cfg = write_config(tmp_path / "c.json")
        assert main(["simulate", "--config", cfg, "--out", str(tmp_path),
                     "--threads", "many"]) == EXIT_CONFIG

    def test_bad_steady_window_rejected(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", steady_window=[5.0, 1.0])
        assert main(["simulate", "--config", cfg,
                     "--out", str(tmp_path)]) == EXIT_CONFIG


class TestSpectra:
    def test_weak_nonlinearity_accepted(self, tmp_path):
        cfg = write_config(tmp_path / "c.json")
        out = tmp_path / "out"
        assert main(["spectra", "--config", cfg, "--out", str(out)]) == EXIT_OK
        lines = (out / "spectra.csv").read_text().splitlines()
        assert lines[0] == ("omega,DS_out,EPR_out,"
                            "S_out_X1X1,S_out_X1X3,S_out_Y1Y1,S_out_Y1Y3")
        assert len(lines) == 513

    def test_strong_nonlinearity_refused_without_override(self, tmp_path):
        cfg = write_config(tmp_path / "c.json",
                           params={"chi": 1e-2, "epsilon": 10.0})
        assert main(["spectra", "--config", cfg,
                     "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_override_reaches_the_unstable_regime(self, tmp_path):
        # with the guard lifted the run proceeds and dies on the real
        # problem: no stable fixed point at this drive
        eps = 10.0 * np.sqrt(2.0)
        cfg = write_config(tmp_path / "c.json",
                           params={"chi": 1e-2, "epsilon": eps})
        assert main(["spectra", "--config", cfg, "--out", str(tmp_path),
                     "--override-gaussian-guard"]) == EXIT_NUMERICAL

    def test_means_from_report_missing_file(self, tmp_path):
        cfg = write_config(tmp_path / "c.json", spectra={"means": "report"})
        assert main(["spectra", "--config", cfg,
                     "--out", str(tmp_path)]) == EXIT_CONFIG


class TestOracle:
    def test_linear_run_flags_integrator_bias(self, tmp_path):
        """At chi=0 the ensemble is noiseless, so its standard errors are
        zero and the fixed-step Euler bias, however small, can never sit
        inside 3 sigma: the honest verdict is a validation failure."""
        cfg = write_config(
            tmp_path / "c.json",
            params={"chi": 0.0, "epsilon": 0.5},
            integration={"n_traj": 300, "t_final": 1.0, "master_seed": 5},
            oracle={"n_cut": 6, "dt": 0.01, "t_final": 1.0,
                    "sample_times": [0.5, 1.0]},
        )
        out = tmp_path / "out"
        assert main(["oracle", "--config", cfg,
                     "--out", str(out)]) == EXIT_VALIDATION
        report = json.loads((out / "oracle_report.json").read_text())
        assert report["pass"] is False
        assert report["n_disagreements"] > 0

    def test_stochastic_run_validates(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json",
            params={"chi": 0.05, "epsilon": 0.5},
            integration={"n_traj": 800, "t_final": 1.0, "master_seed": 12},
            oracle={"n_cut": 7, "dt": 0.01, "t_final": 1.0,
                    "sample_times": [0.5, 1.0]},
        )
        out = tmp_path / "out"
        assert main(["oracle", "--config", cfg, "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "oracle_report.json").read_text())
        assert report["pass"] is True
        assert report["n_disagreements"] == 0

    def test_sample_time_off_grid_rejected(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json",
            params={"chi": 0.05, "epsilon": 0.5},
            integration={"n_traj": 100, "t_final": 1.0, "master_seed": 5},
            oracle={"n_cut": 6, "dt": 0.01, "t_final": 1.0,
                    "sample_times": [0.55]},
        )
        assert main(["oracle", "--config", cfg,
                     "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_overflowing_truncation_is_numerical_failure(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.json",
            params={"chi": 0.1, "epsilon": 1.5},
            integration={"n_traj": 100, "t_final": 1.0, "master_seed": 5},
            oracle={"n_cut": 5, "dt": 0.01, "t_final": 1.0,
                    "sample_times": [0.5, 1.0]},
        )
        assert main(["oracle", "--config", cfg,
                     "--out", str(tmp_path)]) == EXIT_NUMERICAL


class TestSteady:
    def test_stable_point_reported(self, tmp_path):
        cfg = write_config(tmp_path / "c.json")
        out = tmp_path / "out"
        assert main(["steady", "--config", cfg, "--out", str(out)]) == EXIT_OK
        payload = json.loads((out / "steady_state.json").read_text())
        assert payload["drift_stable"] is True
        assert len(payload["drift_eigenvalues"]) == 6
        assert all(re < 0 for re, _ in payload["drift_eigenvalues"])
        assert payload["populations"] == pytest.approx([25.0, 25.0, 25.0], rel=1e-2)

    def test_guarded_regime_still_reports_means(self, tmp_path):
        cfg = write_config(tmp_path / "c.json",
                           params={"chi": 1e-2, "epsilon": 10.0})
        out = tmp_path / "out"
        assert main(["steady", "--config", cfg, "--out", str(out)]) == EXIT_OK
        payload = json.loads((out / "steady_state.json").read_text())
        assert payload["drift_stable"] is None
        assert "drift_detail" in payload
        assert len(payload["means"]) == 3

    def test_unstable_drive_reported(self, tmp_path):
        eps = 10.0 * np.sqrt(2.0)
        cfg = write_config(tmp_path / "c.json",
                           params={"chi": 1e-2, "epsilon": eps})
        out = tmp_path / "out"
        assert main(["steady", "--config", cfg, "--out", str(out),
                     "--override-gaussian-guard"]) == EXIT_OK
        payload = json.loads((out / "steady_state.json").read_text())
        assert payload["drift_stable"] is False
