"""CLI surface: subcommands, exit codes and artifact layout."""

import numpy as np
import pytest

from tcsibench import cli


def run_cli(args):
    return cli.main(args)


class TestStructuralCommand:
    def test_dcmotor(self, tmp_path, capsys):
        rc = run_cli(["--out", str(tmp_path), "--stamp", "t", "structural", "dcmotor"])
        assert rc == 0
        out = tmp_path / "structural_dcmotor_t"
        assert (out / "fim.csv").exists()
        assert (out / "fim.txt").exists()
        assert (out / "model.txt").exists()

    def test_engine(self, tmp_path):
        rc = run_cli(["--out", str(tmp_path), "--stamp", "t", "structural", "engine"])
        assert rc == 0
        text = (tmp_path / "structural_engine_t" / "fim.csv").read_text()
        assert text.count("\n") == 12  # header + 11 fault rows

    def test_invalid_target_usage_error(self, tmp_path):
        with pytest.raises(SystemExit):
            run_cli(["--out", str(tmp_path), "structural", "nonsense"])


class TestSimulateCommand:
    def test_synthetic_run_artifacts(self, tmp_path):
        rc = run_cli([
            "--out", str(tmp_path), "--stamp", "s", "--seed", "3",
            "simulate", "--cycle", "synthetic", "--fault", "none",
        ])
        assert rc == 0
        out = tmp_path / "synthetic_none_s"
        for name in ("run.csv", "manifest.txt", "torque_tracking.csv", "fault_signal.csv"):
            assert (out / name).exists(), name

    def test_fault_run_artifacts(self, tmp_path):
        rc = run_cli([
            "--out", str(tmp_path), "--stamp", "s", "--seed", "3",
            "simulate", "--cycle", "synthetic", "--fault", "f_yTic",
        ])
        assert rc == 0
        sig = np.loadtxt(tmp_path / "synthetic_f_yTic_s" / "fault_signal.csv",
                         delimiter=",", skiprows=1)
        assert sig[:, 1].max() == 1.0  # fault activation present per schedule

    def test_unknown_fault_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit):
            run_cli(["--out", str(tmp_path), "simulate", "--cycle", "synthetic",
                     "--fault", "f_nope"])
        assert not any(tmp_path.iterdir())

    def test_unknown_cycle_config_error(self, tmp_path):
        rc = run_cli(["--out", str(tmp_path), "simulate", "--cycle", "missing_cycle"])
        assert rc == cli.EXIT_CONFIG

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("cycle = synthetic\nseed = 9\nnoise = on\n", encoding="utf-8")
        rc = run_cli(["--config", str(cfg), "--out", str(tmp_path), "--stamp", "c",
                      "simulate"])
        assert rc == 0
        manifest = (tmp_path / "synthetic_none_c" / "manifest.txt").read_text()
        assert "seed = 9" in manifest

    def test_unknown_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("cycel = synthetic\n", encoding="utf-8")
        rc = run_cli(["--config", str(cfg), "--out", str(tmp_path), "simulate"])
        assert rc == cli.EXIT_CONFIG

    def test_engine_param_typo_rejected(self, tmp_path):
        bad = tmp_path / "engine.cfg"
        bad.write_text("H_afx = 1e8\n", encoding="utf-8")
        rc = run_cli(["--engine-config", str(bad), "--out", str(tmp_path),
                      "simulate", "--cycle", "synthetic"])
        assert rc == cli.EXIT_CONFIG


class TestCalibrateAndDiagnose:
    def test_calibrate_then_diagnose(self, tmp_path):
        rc = run_cli(["--out", str(tmp_path), "--stamp", "c", "--seed", "5",
                      "calibrate", "--cycle", "synthetic"])
        assert rc == 0
        calib = tmp_path / "synthetic_calibration_c" / "calibration.csv"
        assert calib.exists()

        rc = run_cli(["--out", str(tmp_path), "--stamp", "f", "--seed", "6",
                      "simulate", "--cycle", "synthetic", "--fault", "f_ypim"])
        assert rc == 0
        run_dir = tmp_path / "synthetic_f_ypim_f"
        rc = run_cli(["diagnose", "--run", str(run_dir), "--calibration", str(calib)])
        assert rc == 0
        assert (run_dir / "residuals_normalized.csv").exists()
        events = (run_dir / "events.csv").read_text().strip().splitlines()
        assert len(events) >= 2  # header + at least one detection
        assert any("r_pim" in line for line in events[1:])


@pytest.mark.slow
class TestCampaignCommand:
    def test_synthetic_campaign(self, tmp_path):
        rc = run_cli(["--out", str(tmp_path), "--stamp", "k", "--seed", "21",
                      "campaign", "--cycle", "synthetic"])
        assert rc == 0
        out = tmp_path / "campaign_synthetic_k"
        for name in ("calibration.csv", "fsm.csv", "fim.csv", "fsm.txt",
                     "fim.txt", "summary.txt"):
            assert (out / name).exists(), name
        # 12 run directories: fault-free plus the 11 catalogued faults
        run_dirs = [p for p in out.iterdir() if p.is_dir()]
        assert len(run_dirs) == 12
        fsm_lines = (out / "fsm.csv").read_text().strip().splitlines()
        assert len(fsm_lines) == 10
