import csv
import json

import pytest

from heraldopt import cli, mesh
from heraldopt.config import DEFAULT_SWEEP, ExperimentConfig, load_config
from heraldopt.exceptions import ValidationError


@pytest.fixture(scope="module")
def angles_file(tmp_path_factory, bootstrap_angles):
    path = tmp_path_factory.mktemp("angles") / "bootstrap.json"
    mesh.save_angles(bootstrap_angles, str(path))
    return str(path)


def write_config(tmp_path, text, name="config.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadConfig:
    def test_no_file_gives_defaults(self):
        assert load_config(None) == ExperimentConfig()

    def test_empty_file_gives_defaults(self, tmp_path):
        path = write_config(tmp_path, "")
        assert load_config(path) == ExperimentConfig()

    def test_shipped_default_config_matches_builtin(self):
        assert load_config("configs/default.yaml") == ExperimentConfig()

    def test_default_sweep_grid(self):
        assert len(DEFAULT_SWEEP) == 16
        assert DEFAULT_SWEEP[0] == 0.0
        assert DEFAULT_SWEEP[-1] == 0.145

    def test_section_overrides(self, tmp_path):
        path = write_config(
            tmp_path,
            "training:\n  iterations: 7\n  s_star: 0.05\n"
            "output:\n  directory: elsewhere\n",
        )
        config = load_config(path)
        assert config.iterations == 7
        assert config.s_star == 0.05
        assert config.output_directory == "elsewhere"

    def test_unknown_section_rejected(self, tmp_path):
        path = write_config(tmp_path, "optimizer:\n  iterations: 7\n")
        with pytest.raises(ValidationError, match="unknown config section"):
            load_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = write_config(tmp_path, "training:\n  momentum: 0.9\n")
        with pytest.raises(ValidationError, match="unknown keys"):
            load_config(path)

    def test_custom_states(self, tmp_path):
        path = write_config(
            tmp_path,
            "setup:\n"
            "  input_state:\n"
            "    - {occupation: [1, 0, 0, 1], amplitude: 1.0}\n"
            "  target_state:\n"
            "    - {occupation: [0, 1, 1, 0], amplitude: [0.0, 1.0]}\n",
        )
        config = load_config(path)
        assert config.input_terms == (((1, 0, 0, 1), 1.0),)
        assert config.target_terms == (((0, 1, 1, 0), 1.0j),)


def read_summary(out_dir):
    with open(out_dir / "summary.json") as fh:
        return json.load(fh)


def read_trajectory(out_dir, name="trajectory.csv"):
    with open(out_dir / name) as fh:
        return list(csv.DictReader(fh))


class TestTrainCommand:
    def test_short_run_writes_artifacts(self, tmp_path, angles_file, capsys):
        config = write_config(tmp_path, "training:\n  iterations: 25\n")
        out = tmp_path / "run"
        code = cli.main(
            ["train", "--config", config, "--angles", angles_file, "--out", str(out)]
        )
        assert code == 0
        summary = read_summary(out)
        assert summary["iterations"] == 25
        assert summary["final_fidelity"] >= summary["baseline_fidelity"]
        trajectory = read_trajectory(out)
        assert len(trajectory) == 25
        assert trajectory[0]["iteration"] == "0"
        final = mesh.load_angles(str(out / "final_angles.json"))
        assert final.modes == 6
        stdout = capsys.readouterr().out
        assert "final_fidelity=" in stdout

    def test_zero_iterations_echoes_baseline(self, tmp_path, angles_file):
        config = write_config(tmp_path, "training:\n  iterations: 0\n")
        out = tmp_path / "run0"
        assert cli.main(
            ["train", "--config", config, "--angles", angles_file, "--out", str(out)]
        ) == 0
        summary = read_summary(out)
        assert summary["final_fidelity"] == summary["baseline_fidelity"]
        assert summary["final_success"] == summary["baseline_success"]
        assert (out / "trajectory.csv").read_text() == "iteration,loss,success,fidelity\n"
        final = mesh.load_angles(str(out / "final_angles.json"))
        assert final == mesh.load_angles(angles_file)

    def test_final_angles_round_trip(self, tmp_path, angles_file):
        # re-evaluating the written final angles reproduces the summary numbers
        config = write_config(tmp_path, "training:\n  iterations: 25\n")
        out_a = tmp_path / "a"
        cli.main(["train", "--config", config, "--angles", angles_file, "--out", str(out_a)])
        summary_a = read_summary(out_a)

        config0 = write_config(tmp_path, "training:\n  iterations: 0\n", name="c0.yaml")
        out_b = tmp_path / "b"
        cli.main(
            [
                "train",
                "--config",
                config0,
                "--angles",
                str(out_a / "final_angles.json"),
                "--out",
                str(out_b),
            ]
        )
        summary_b = read_summary(out_b)
        assert abs(summary_b["final_fidelity"] - summary_a["final_fidelity"]) <= 1e-10
        assert abs(summary_b["final_success"] - summary_a["final_success"]) <= 1e-10

    def test_malformed_angle_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli.main(["train", "--angles", str(bad), "--out", str(tmp_path / "o")]) == 3

    def test_missing_angle_file(self, tmp_path):
        missing = str(tmp_path / "nope.json")
        assert cli.main(["train", "--angles", missing, "--out", str(tmp_path / "o")]) == 3

    def test_missing_config_file(self, tmp_path, angles_file):
        code = cli.main(
            [
                "train",
                "--config",
                str(tmp_path / "nope.yaml"),
                "--angles",
                angles_file,
                "--out",
                str(tmp_path / "o"),
            ]
        )
        assert code == 3

    def test_bad_config_is_usage_error(self, tmp_path, angles_file):
        config = write_config(tmp_path, "nonsense:\n  key: 1\n")
        code = cli.main(
            ["train", "--config", config, "--angles", angles_file, "--out", str(tmp_path / "o")]
        )
        assert code == 1

    def test_missing_required_angles_flag(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["train"])
        assert exc.value.code == 1


class TestEvalCommand:
    def test_prints_metrics(self, angles_file, capsys):
        assert cli.main(["eval", "--angles", angles_file]) == 0
        stdout = capsys.readouterr().out
        assert stdout.startswith("eval: loss=")
        fields = dict(
            part.split("=") for part in stdout.removeprefix("eval: ").split()
        )
        assert 0.0 < float(fields["fidelity"]) < 1.0
        assert 0.0 < float(fields["success"]) < 1.0


class TestBootstrapCommand:
    def test_zero_restarts_exits_two(self, tmp_path):
        config = write_config(tmp_path, "bootstrap:\n  restarts: 0\n")
        out = tmp_path / "boot"
        assert cli.main(["bootstrap", "--config", config, "--out", str(out)]) == 2

    def test_writes_angles_and_report(self, tmp_path, capsys):
        config = write_config(
            tmp_path, "bootstrap:\n  restarts: 8\n  iterations: 1500\n"
        )
        out = tmp_path / "boot"
        assert cli.main(["bootstrap", "--config", config, "--out", str(out)]) == 0
        angles = mesh.load_angles(str(out / "bootstrap_angles.json"))
        assert angles.modes == 6
        with open(out / "bootstrap_report.json") as fh:
            report = json.load(fh)
        assert report["ideal_fidelity"] >= 1.0 - 1e-6
        assert 0.070 <= report["ideal_success"] <= 0.078
        assert "bootstrap: ideal fidelity=" in capsys.readouterr().out


class TestSweepCommand:
    def test_single_point_matches_train(self, tmp_path, angles_file):
        config = write_config(
            tmp_path,
            "training:\n  iterations: 25\nsweep:\n  s_star_values: [0.075]\n",
        )
        out_sweep = tmp_path / "sweep"
        assert cli.main(
            ["sweep", "--config", config, "--angles", angles_file, "--out", str(out_sweep)]
        ) == 0
        with open(out_sweep / "sweep.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert rows[0]["s_star"] == "baseline"
        assert len(rows) == 2

        out_train = tmp_path / "train"
        cli.main(
            ["train", "--config", config, "--angles", angles_file, "--out", str(out_train)]
        )
        summary = read_summary(out_train)
        assert float(rows[1]["final_fidelity"]) == summary["final_fidelity"]
        assert float(rows[1]["final_success"]) == summary["final_success"]
        assert float(rows[0]["final_fidelity"]) == summary["baseline_fidelity"]
        tag_angles = mesh.load_angles(rows[1]["angles_path"])
        assert tag_angles == mesh.load_angles(str(out_train / "final_angles.json"))

    def test_empty_sweep_list_is_usage_error(self, tmp_path, angles_file):
        config = write_config(tmp_path, "sweep:\n  s_star_values: []\n")
        code = cli.main(
            ["sweep", "--config", config, "--angles", angles_file, "--out", str(tmp_path / "o")]
        )
        assert code == 1

    def test_threads_give_same_csv(self, tmp_path, angles_file):
        config = write_config(
            tmp_path,
            "training:\n  iterations: 10\nsweep:\n  s_star_values: [0.0, 0.075]\n",
        )
        out = tmp_path / "seq"
        cli.main(["sweep", "--config", config, "--angles", angles_file, "--out", str(out)])
        out2 = tmp_path / "par"
        cli.main(
            [
                "sweep",
                "--config",
                config,
                "--angles",
                angles_file,
                "--out",
                str(out2),
                "--threads",
                "2",
            ]
        )
        a = (out / "sweep.csv").read_text().replace(str(out), "OUT")
        b = (out2 / "sweep.csv").read_text().replace(str(out2), "OUT")
        assert a == b
