"""
Integration tests for the command-line entry point.
"""
import json

import numpy as np
import pytest

from error_handler import EXIT_DATA, EXIT_OK, EXIT_USAGE
from main import build_parser, main
from pointcloud import PointCloud, load_cloud, write_cloud


@pytest.fixture
def paraboloid_file(tmp_path):
    path = tmp_path / "paraboloid.xyz"
    assert main(["generate", "paraboloid", "--sign", "-", "--n", "300", "--seed", "7", "-o", str(path)]) == EXIT_OK
    return path


@pytest.fixture
def plane_file(tmp_path):
    rng = np.random.default_rng(0)
    xy = rng.uniform(-1, 1, (150, 2))
    path = tmp_path / "plane.xyz"
    with path.open("w") as stream:
        write_cloud(PointCloud(np.column_stack([xy, np.zeros(150)])), stream, "xyz")
    return path


class TestGenerate:
    """Test cases for the generate command"""

    def test_writes_cloud_and_reports(self, capsys, paraboloid_file):
        out = capsys.readouterr().out
        assert out.startswith("N=300 diameter=")
        assert out.strip().endswith("seed=7")
        assert len(paraboloid_file.read_text().splitlines()) == 300

    def test_byte_identical_reruns(self, tmp_path, paraboloid_file):
        again = tmp_path / "again.xyz"
        main(["generate", "paraboloid", "--sign", "-", "--n", "300", "--seed", "7", "-o", str(again)])
        assert again.read_bytes() == paraboloid_file.read_bytes()

    def test_cylinder_labels(self, tmp_path):
        path = tmp_path / "cyl.xyz"
        code = main(["generate", "cylinder", "--caps", "hemi", "--n-side", "150", "--n-cap", "75",
                     "--labels", "-o", str(path)])
        assert code == EXIT_OK
        rows = [line.split() for line in path.read_text().splitlines()]
        assert len(rows) == 300
        assert {len(row) for row in rows} == {4}
        assert sorted({row[3] for row in rows}) == ["0", "1", "2"]

    def test_labels_need_part_information(self, tmp_path):
        code = main(["generate", "sphere", "--n", "10", "--labels", "-o", str(tmp_path / "s.xyz")])
        assert code == EXIT_USAGE

    @pytest.mark.parametrize("flags", [
        ["sphere", "--n", "0"],
        ["sphere", "--seed", "-1"],
        ["sphere", "--radius", "0"],
        ["cylinder", "--n-cap", "0"],
        ["noisy", "--sigma", "-0.1"],
    ])
    def test_invalid_generator_flags_are_usage_errors(self, tmp_path, flags):
        path = tmp_path / "bad.xyz"
        assert main(["generate", *flags, "-o", str(path)]) == EXIT_USAGE
        assert not path.exists()

    def test_noisy_surface(self, tmp_path):
        path = tmp_path / "noisy.csv"
        code = main(["generate", "noisy", "--surface", "upper", "--n", "50", "--format", "csv", "-o", str(path)])
        assert code == EXIT_OK
        assert load_cloud(path.read_bytes(), "csv").size == 50


class TestEstimate:
    """Test cases for the estimate command"""

    def test_outputs_and_determinism(self, tmp_path, paraboloid_file):
        outputs = []
        for workers in ("1", "4"):
            csv_path = tmp_path / f"est{workers}.csv"
            json_path = tmp_path / f"est{workers}.json"
            code = main(["estimate", str(paraboloid_file), "--eta-mult", "3", "--delta", "0.001",
                         "--workers", workers, "-o", str(csv_path), "--summary", str(json_path)])
            assert code == EXIT_OK
            outputs.append((csv_path.read_bytes(), json_path.read_bytes()))
        assert outputs[0] == outputs[1]

        lines = outputs[0][0].decode().splitlines()
        assert lines[0] == "idx,x1,x2,x3,dim,curvature,epsilon,nbrs,status"
        assert len(lines) == 301
        summary = json.loads(outputs[0][1])
        assert sum(summary["status_counts"].values()) == 300
        assert summary["delta"] == 0.001

    def test_coordinates_round_trip(self, tmp_path, paraboloid_file):
        csv_path = tmp_path / "est.csv"
        main(["estimate", str(paraboloid_file), "-o", str(csv_path)])
        rows = [line.split(",") for line in csv_path.read_text().splitlines()[1:]]
        text = "\n".join(" ".join(row[1:4]) for row in rows)
        np.testing.assert_array_equal(load_cloud(text.encode(), "xyz").points,
                                      load_cloud(paraboloid_file.read_bytes(), "xyz").points)

    def test_flat_input(self, tmp_path, plane_file):
        csv_path = tmp_path / "plane.csv"
        assert main(["estimate", str(plane_file), "-o", str(csv_path)]) == EXIT_OK
        rows = [line.split(",") for line in csv_path.read_text().splitlines()[1:]]
        ok = [row for row in rows if row[-1] == "ok"]
        assert ok
        assert all(row[4] == "2" and abs(float(row[5])) <= 1e-6 for row in ok)

    def test_stdout_when_no_output(self, plane_file, capsys):
        assert main(["estimate", str(plane_file)]) == EXIT_OK
        assert capsys.readouterr().out.startswith("idx,x1,x2,x3,dim")

    def test_config_file_and_flag_precedence(self, tmp_path, plane_file):
        config = tmp_path / "run.conf"
        config.write_text("delta=0.01\nbins=5\n")
        summary = tmp_path / "s.json"
        main(["estimate", str(plane_file), "--config", str(config), "--delta", "0.02",
              "-o", str(tmp_path / "e.csv"), "--summary", str(summary)])
        data = json.loads(summary.read_text())
        assert data["delta"] == 0.02
        assert data["curvature_histogram"]["bins"] == 5

    def test_svg_figures(self, tmp_path, paraboloid_file):
        figure = tmp_path / "fig.svg"
        assert main(["estimate", str(paraboloid_file), "-o", str(tmp_path / "e.csv"), "--svg", str(figure)]) == EXIT_OK
        for path in (figure, tmp_path / "fig_dim.svg", tmp_path / "fig_hist.svg"):
            assert path.read_text().lstrip().startswith("<?xml")

    def test_subsample(self, tmp_path, paraboloid_file):
        csv_path = tmp_path / "sub.csv"
        assert main(["estimate", str(paraboloid_file), "--subsample", "100", "-o", str(csv_path)]) == EXIT_OK
        assert len(csv_path.read_text().splitlines()) == 101


class TestCluster:
    """Test cases for the cluster command"""

    def test_flat_input_is_one_cluster(self, tmp_path, plane_file):
        summary = tmp_path / "c.json"
        code = main(["cluster", str(plane_file), "-o", str(tmp_path / "c.csv"),
                     "--summary", str(summary), "--merge-heights"])
        assert code == EXIT_OK
        data = json.loads(summary.read_text())
        assert data["cluster_count"] == 1
        assert data["params"] == {"t": 4.0, "d": 0.5, "d_prime": 2.0}
        assert len(data["merge_heights"]) == 149
        header = (tmp_path / "c.csv").read_text().splitlines()[0]
        assert header == "idx,x1,x2,x3,curvature,a,label,flag"

    def test_deterministic_across_workers(self, tmp_path, paraboloid_file):
        outputs = []
        for workers in ("1", "4"):
            path = tmp_path / f"c{workers}.csv"
            main(["cluster", str(paraboloid_file), "--workers", workers, "-o", str(path)])
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1]


class TestSweep:
    """Test cases for the sweep command"""

    def test_one_table_per_multiplier(self, tmp_path, plane_file):
        out = tmp_path / "sweep" / "plane.csv"
        summary = tmp_path / "sweep.json"
        code = main(["sweep", str(plane_file), "--multipliers", "1,2", "-o", str(out), "--summary", str(summary)])
        assert code == EXIT_OK
        assert (tmp_path / "sweep" / "plane_k1.csv").exists()
        assert (tmp_path / "sweep" / "plane_k2.csv").exists()
        assert sorted(json.loads(summary.read_text())["sweeps"]) == ["1", "2"]

    def test_output_required(self, plane_file):
        assert main(["sweep", str(plane_file)]) == EXIT_USAGE


class TestLln:
    """Test cases for the averaging experiment command"""

    def test_outputs_and_determinism(self, tmp_path):
        outputs = []
        for workers in ("1", "4"):
            csv_path = tmp_path / f"lln{workers}.csv"
            json_path = tmp_path / f"lln{workers}.json"
            code = main(["lln", "--n", "60", "--runs", "2", "--seed", "3", "--workers", workers,
                         "-o", str(csv_path), "--summary", str(json_path)])
            assert code == EXIT_OK
            outputs.append((csv_path.read_bytes(), json_path.read_bytes()))
        assert outputs[0] == outputs[1]
        lines = outputs[0][0].decode().splitlines()
        assert lines[0] == "idx,ax,ay,mean_curv,ok_runs"
        assert len(lines) == 61
        summary = json.loads(outputs[0][1])
        assert summary["runs"] == 2
        assert summary["delta"] == 0.005
        assert summary["eta_mult"] == 3.0


class TestExitCodes:
    """Test cases for error reporting"""

    def test_missing_input(self, tmp_path, capsys):
        assert main(["estimate", str(tmp_path / "absent.xyz")]) == EXIT_DATA
        assert capsys.readouterr().err.strip()

    def test_unknown_flag(self, plane_file):
        assert main(["estimate", str(plane_file), "--bogus"]) == EXIT_USAGE

    def test_missing_command(self):
        assert main([]) == EXIT_USAGE

    def test_exclusive_eta_flags(self, plane_file):
        assert main(["estimate", str(plane_file), "--eta", "1", "--eta-mult", "3"]) == EXIT_USAGE

    def test_non_positive_delta(self, plane_file):
        assert main(["estimate", str(plane_file), "--delta", "0"]) == EXIT_USAGE

    def test_unparsable_input(self, tmp_path):
        path = tmp_path / "bad.xyz"
        path.write_text("0 0 zero\n")
        assert main(["estimate", str(path)]) == EXIT_DATA

    def test_degenerate_input(self, tmp_path):
        path = tmp_path / "one.xyz"
        path.write_text("1 2 3\n")
        assert main(["estimate", str(path)]) == EXIT_DATA

    def test_unknown_log_level(self, plane_file):
        assert main(["estimate", str(plane_file), "--log-level", "chatty"]) == EXIT_USAGE


def test_parser_lists_commands():
    parser = build_parser()
    actions = [a for a in parser._actions if a.dest == "command"]
    assert set(actions[0].choices) == {"generate", "estimate", "cluster", "sweep", "lln"}
