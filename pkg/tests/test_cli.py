import json
import subprocess
import sys

import numpy as np
import pytest

from marinfer.cli import main, read_series


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def sim_csv(tmp_path):
    path = tmp_path / "sim.csv"
    code = main([
        "simulate", "--T", "400", "--phi", "0.65", "--vphi", "0.35",
        "--nu", "3", "--eta", "3", "--seed", "11", "--out", str(path),
    ])
    assert code == 0
    return path


class TestReadSeries:
    def test_single_column_no_header(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("1.5\n2.5\n-3.0\n")
        np.testing.assert_array_equal(read_series(str(p)), [1.5, 2.5, -3.0])

    def test_header_and_date_column(self, tmp_path):
        p = tmp_path / "b.csv"
        p.write_text("date,value\n2020-01,1.0\n2020-02,2.0\n")
        np.testing.assert_array_equal(read_series(str(p), "value"), [1.0, 2.0])
        np.testing.assert_array_equal(read_series(str(p), "1"), [1.0, 2.0])

    def test_multi_column_requires_selector(self, tmp_path):
        from marinfer.cli import DataError

        p = tmp_path / "c.csv"
        p.write_text("1,2\n3,4\n")
        with pytest.raises(DataError):
            read_series(str(p))

    def test_comments_and_blanks_skipped(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("# meta\n\n1.0\n2.0\n")
        np.testing.assert_array_equal(read_series(str(p)), [1.0, 2.0])


class TestExitCodes:
    def test_missing_required_flag_is_usage_error(self, capsys):
        code, _, err = run_cli(["fit"], capsys)
        assert code == 1
        assert "usage error" in err

    def test_unknown_command_is_usage_error(self, capsys):
        code, _, _ = run_cli(["frobnicate"], capsys)
        assert code == 1

    def test_empty_file_is_data_error(self, tmp_path, capsys):
        p = tmp_path / "empty.csv"
        p.write_text("")
        code, _, err = run_cli(["fit", "--input", str(p)], capsys)
        assert code == 2
        assert "no data" in err

    def test_non_numeric_cell_reports_line_number(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("1.0\n2.0\nxyz\n4.0\n")
        code, _, err = run_cli(["fit", "--input", str(p)], capsys)
        assert code == 2
        assert "line 3" in err and "xyz" in err

    def test_calibration_domain_error_is_numerical(self, capsys):
        code, _, err = run_cli(
            ["calibrate-k", "--nu", "0.9", "--T", "100", "--N", "1000", "--seed", "1"], capsys
        )
        assert code == 3
        assert "numerical failure" in err

    def test_missing_input_file_is_data_error(self, capsys):
        code, _, _ = run_cli(["fit", "--input", "/nonexistent/file.csv"], capsys)
        assert code == 2


class TestSimulate:
    def test_output_embeds_metadata_and_reproduces(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["simulate", "--T", "50", "--phi", "0.5", "--nu", "2", "--seed", "7"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        text = a.read_text()
        assert "# version=" in text and "# seed=7" in text and "# command=marinfer simulate" in text
        assert len(read_series(str(a))) == 50

    def test_different_seed_changes_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "--T", "50", "--nu", "2", "--seed", "1", "--out", str(a)])
        main(["simulate", "--T", "50", "--nu", "2", "--seed", "2", "--out", str(b)])
        assert a.read_bytes() != b.read_bytes()

    def test_nonstationary_rejected(self, capsys):
        code, _, _ = run_cli(["simulate", "--T", "50", "--phi", "1.2", "--nu", "2", "--seed", "1"], capsys)
        assert code == 3


class TestFit:
    def test_round_trip_json(self, sim_csv, tmp_path):
        out = tmp_path / "fit.json"
        code = main([
            "fit", "--input", str(sim_csv), "--r", "1", "--s", "1",
            "--format", "json", "--seed", "3", "--kstar-n", "2000", "--out", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["model"]["r"] == 1 and report["model"]["s"] == 1
        assert report["model"]["phi"][0] == pytest.approx(0.65, abs=0.15)
        assert report["model"]["vphi"][0] == pytest.approx(0.35, abs=0.15)
        assert report["diagnostics"]["seed"] == 3
        assert report["diagnostics"]["version"]
        for method in ("classic", "block_hessian", "robust"):
            block = report["se"][method]
            if block is not None:
                assert len(block["phi"]) == 1 and len(block["vphi"]) == 1

    def test_selects_orders_by_default(self, sim_csv, tmp_path):
        out = tmp_path / "fit2.json"
        code = main([
            "fit", "--input", str(sim_csv), "--p-max", "3", "--format", "json",
            "--kstar-n", "2000", "--out", str(out),
        ])
        assert code == 0
        report = json.loads(out.read_text())
        assert report["diagnostics"]["selected_p"] >= 1
        assert report["model"]["r"] + report["model"]["s"] == report["diagnostics"]["selected_p"]

    def test_table_output_mirrors_parameter_layout(self, sim_csv, capsys):
        code, out, _ = run_cli(
            ["fit", "--input", str(sim_csv), "--r", "1", "--s", "1", "--kstar-n", "2000"], capsys
        )
        assert code == 0
        assert "parameter" in out and "phi_1" in out and "vphi_1" in out
        assert "se_classic" in out and "se_robust" in out
        assert "loglik:" in out

    def test_csv_output_heavy_tail_has_slash(self, tmp_path, capsys):
        path = tmp_path / "heavy.csv"
        main(["simulate", "--T", "400", "--phi", "0.3", "--vphi", "0.2",
              "--nu", "1.4", "--eta", "1", "--seed", "5", "--out", str(path)])
        code, out, _ = run_cli(
            ["fit", "--input", str(path), "--r", "1", "--s", "1", "--format", "csv", "--kstar-n", "2000"],
            capsys,
        )
        assert code == 0
        classic_cells = [ln.split(",")[2] for ln in out.splitlines() if ln.startswith(("phi_1", "vphi_1"))]
        assert classic_cells == ["/", "/"]


class TestCalibrateK:
    def test_writes_density_file(self, tmp_path):
        out = tmp_path / "cal.csv"
        code = main([
            "calibrate-k", "--nu", "1.6", "--T", "60", "--N", "1000", "--seed", "4", "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("# version=")
        idx = lines.index("nu,T,N,bandwidth,kstar,trimmed_fraction")
        assert lines[idx + 1].startswith("1.6,60,1000,")
        assert lines[idx + 2] == "x,density"
        assert len(lines) == idx + 3 + 512

    def test_gaussian_flag(self, tmp_path):
        out = tmp_path / "gauss.csv"
        code = main([
            "calibrate-k", "--gaussian", "--T", "60", "--N", "1000", "--seed", "4", "--out", str(out),
        ])
        assert code == 0
        assert "gaussian,60,1000," in out.read_text()

    def test_reproducible_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["calibrate-k", "--nu", "2.0", "--T", "50", "--N", "1000", "--seed", "9"]
        main(args + ["--out", str(a)])
        main(args + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_table_mode_regenerates_full_grid(self, tmp_path):
        out = tmp_path / "grid.csv"
        code = main(["calibrate-k", "--table", "--N", "1000", "--seed", "3", "--out", str(out)])
        assert code == 0
        lines = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
        assert lines[0].startswith("T,nu=1.2,nu=1.4,")
        assert len(lines) == 1 + 6  # six sample-size rows
        first = lines[1].split(",")
        assert first[0] == "100" and len(first) == 7
        # desk-scale N=1000 still lands in the right neighborhood of 4.186
        assert abs(float(first[1]) - 4.186322) / 4.186322 < 0.25


class TestExperimentCommands:
    def test_erf_from_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "phi": [0.0], "vphi": [0.0], "nu": 1.8, "eta": 1.0,
            "T_grid": [60], "N": 100, "seed": 5,
            "methods": ["classic", "robust"], "burn": 200,
        }))
        out = tmp_path / "erf.csv"
        code = main(["erf", "--config", str(cfg), "--out", str(out), "--threads", "2"])
        assert code == 0
        text = out.read_text()
        assert "# seed=5" in text
        assert "60,classic,/,/" in text
        assert "60,robust," in text

    def test_sd_growth_from_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "phi": [0.65], "vphi": [0.35], "nu": 3.0, "eta": 3.0,
            "T_grid": [100], "N": 100, "seed": 6, "burn": 200,
        }))
        out = tmp_path / "sd.csv"
        code = main(["sd-growth", "--config", str(cfg), "--out", str(out)])
        assert code == 0
        lines = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
        assert lines[0].startswith("T,kstar,")
        assert lines[1].startswith("100,1.937395,")

    def test_bad_config_is_data_error(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        code, _, err = run_cli(["erf", "--config", str(cfg)], capsys)
        assert code == 2

    def test_missing_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"phi": [0.1], "nu": 3.0}))
        code, _, _ = run_cli(["erf", "--config", str(cfg)], capsys)
        assert code == 2


class TestEntryPoint:
    def test_console_script_version(self):
        proc = subprocess.run(
            [sys.executable, "-m", "marinfer.cli", "--version"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert "marinfer" in proc.stdout

    def test_threads_env_override(self, monkeypatch):
        from marinfer.cli import build_parser

        monkeypatch.setenv("MARINFER_THREADS", "3")
        args = build_parser().parse_args(["erf", "--config", "x.json"])
        assert args.threads == 3
        monkeypatch.setenv("MARINFER_THREADS", "not-a-number")
        args = build_parser().parse_args(["erf", "--config", "x.json"])
        assert args.threads == 1
