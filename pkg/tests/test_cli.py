import csv
import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from circtests.ancova import GroupedSample, ancova_test_circ_lin, ancova_test_circ_response
from circtests.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main, read_dataset
from circtests.core import KernelSpec, geodesic_distance
from circtests.estimators import RegressionSample, cv_select, fit
from circtests.noeffect import noeffect_test_circ_lin
from circtests.simulation import ScenarioSpec, generate_dataset, rejection_study, rows_to_csv


def write_csv(path, x, y, groups=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["predictor", "response"] + (["group"] if groups is not None else []))
        for k in range(len(x)):
            row = [repr(float(x[k])), repr(float(y[k]))]
            if groups is not None:
                row.append(str(groups[k]))
            w.writerow(row)
    return str(path)


def write_grouped(path, data):
    labels = np.repeat([f"g{i + 1}" for i in range(data.I)], data.sizes)
    return write_csv(path, data.predictors, data.responses, labels)


def spec_data(scenario, test, beta, n, seed):
    calibration = "chi2" if scenario == "circ-lin" else "bootstrap"
    return generate_dataset(ScenarioSpec(scenario, test, beta, n, calibration=calibration), seed)


def read_lines(path):
    with open(path) as fh:
        return fh.read().splitlines()


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture
def circ_lin_file(tmp_path):
    s = spec_data("circ-lin", "noeffect", 0.3, 60, 1)
    return write_csv(tmp_path / "cl.csv", s.predictors, s.responses), s


@pytest.fixture
def equality_file(tmp_path):
    g = spec_data("circ-lin", "equality", 2.0, (40, 40), 2)
    return write_grouped(tmp_path / "eq.csv", g), g


class TestReadDataset:
    def test_groups_in_first_appearance_order(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", [1, 2, 3, 4, 5, 6], [0, 1, 2, 3, 4, 5], ["b", "a", "b", "a", "b", "a"])
        grouped = read_dataset(path, "circ-lin").grouped()
        assert_allclose(grouped.groups[0].predictors, [1, 3, 5])

    def test_crlf_and_blank_lines(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_bytes(b"Predictor,Response\r\n0.5,1\r\n\r\n1.5,2\r\n")
        d = read_dataset(str(path), "circ-lin")
        assert_allclose(d.predictors, [0.5, 1.5])

    def test_bad_value_cites_line(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("predictor,response\n0.5,1\n0.7,abc\n")
        assert main(["test", str(path), "--scenario", "circ-lin", "--test", "noeffect", "--param", "1"]) == EXIT_DATA

    def test_degrees_wrapped(self, tmp_path):
        path = write_csv(tmp_path / "d.csv", [-90.0, 450.0, 10.0], [1, 2, 3])
        d = read_dataset(path, "circ-lin", degrees=True)
        assert_allclose(d.sample().predictors, [1.5 * np.pi, 0.5 * np.pi, np.deg2rad(10)])


class TestFit:
    def test_constant_response(self, tmp_path):
        x = np.random.default_rng(0).uniform(0, 6.28, 30)
        path = write_csv(tmp_path / "c.csv", x, np.full(30, 2.5))
        out = tmp_path / "fit.csv"
        assert main(["fit", path, "--scenario", "circ-lin", "--param", "3", "--out", str(out)]) == EXIT_OK
        lines = read_lines(out)
        assert lines[0] == "eval_point,fitted" and len(lines) == 201
        assert_allclose([float(r.split(",")[1]) for r in lines[1:]], 2.5, rtol=1e-12)

    def test_cv_sidecar_matches_library(self, tmp_path, circ_lin_file):
        path, s = circ_lin_file
        out = tmp_path / "fit.csv"
        assert main(["fit", path, "--scenario", "circ-lin", "--cv", "--out", str(out), "--grid-points", "50"]) == 0
        side = json.loads((tmp_path / "fit.json").read_text())
        res = cv_select(s)
        assert side["smoothing"] == {"kind": "kappa", "value": res.param}
        assert side["cv_score"] == res.score and side["method"] == "cv" and side["n"] == 60
        grid = np.arange(50) * (2 * np.pi / 50)
        fitted = [float(r.split(",")[1]) for r in read_lines(out)[1:]]
        assert np.array_equal(fitted, fit(s, res.param, grid))

    def test_degrees_match_radians(self, tmp_path):
        s = spec_data("circ-circ", "noeffect", 0.5, 50, 3)
        rad = write_csv(tmp_path / "r.csv", s.predictors, s.responses)
        deg = write_csv(tmp_path / "d.csv", np.rad2deg(s.predictors), np.rad2deg(s.responses))
        args = ["--scenario", "circ-circ", "--param", "4", "--grid-points", "36"]
        assert main(["fit", rad, *args, "--out", str(tmp_path / "r_fit.csv")]) == 0
        assert main(["fit", deg, *args, "--degrees", "--out", str(tmp_path / "d_fit.csv")]) == 0
        r = np.array([[float(v) for v in row.split(",")] for row in read_lines(tmp_path / "r_fit.csv")[1:]])
        d = np.array([[float(v) for v in row.split(",")] for row in read_lines(tmp_path / "d_fit.csv")[1:]])
        assert_allclose(np.deg2rad(d[:, 0]), r[:, 0], atol=1e-12)
        assert np.max(geodesic_distance(np.deg2rad(d[:, 1]), r[:, 1])) < 1e-9
        assert json.loads((tmp_path / "d_fit.json").read_text())["units"] == "degrees"


class TestTestCommand:
    def run_json(self, tmp_path, argv):
        out = tmp_path / "report.json"
        assert main([*argv, "--out", str(out)]) == EXIT_OK
        return json.loads(out.read_text())

    def test_identical_groups_equality(self, tmp_path):
        s = spec_data("circ-lin", "noeffect", 0.3, 30, 4)
        x = np.concatenate([s.predictors, s.predictors])
        y = np.concatenate([s.responses, s.responses])
        path = write_csv(tmp_path / "same.csv", x, y, ["a"] * 30 + ["b"] * 30)
        doc = self.run_json(tmp_path, ["test", path, "--scenario", "circ-lin", "--test", "equality", "--param", "2"])
        assert abs(doc["statistic"]) < 1e-12 and doc["p_value"] >= 0.99 and doc["reject"] is False
        assert set(doc) == {"test", "statistic", "p_value", "calibration", "smoothing", "boot_reps", "seed", "alpha", "reject"}

    def test_chi2_equality_parity(self, tmp_path, equality_file):
        path, g = equality_file
        doc = self.run_json(tmp_path, ["test", path, "--scenario", "circ-lin", "--test", "equality", "--param", "3"])
        lib = ancova_test_circ_lin(g, 3.0, "equality", "chi2")
        assert doc["p_value"] == lib.p_value and doc["statistic"] == lib.statistic
        assert doc["calibration"] == "chi2"

    def test_cv_parity_grouped(self, tmp_path, equality_file):
        path, g = equality_file
        argv = ["test", path, "--scenario", "circ-lin", "--test", "parallelism", "--cv", "--cv-factor", "0.5"]
        doc = self.run_json(tmp_path, argv)
        kappa = cv_select(g.pooled()).param * 0.5
        lib = ancova_test_circ_lin(g, kappa, "parallelism", "chi2")
        assert doc["p_value"] == lib.p_value and doc["smoothing"]["value"] == kappa

    def test_bootstrap_parity_circular_response(self, tmp_path):
        g = spec_data("lin-circ", "equality", 1.0, (20, 20), 5)
        path = write_grouped(tmp_path / "lc.csv", g)
        argv = ["test", path, "--scenario", "lin-circ", "--test", "equality", "--param", "0.2",
                "--boot-reps", "50", "--seed", "3"]
        doc = self.run_json(tmp_path, argv)
        lib = ancova_test_circ_response(g, KernelSpec("gaussian", 0.2), "equality", 50, 3)
        assert doc["p_value"] == lib.p_value and doc["seed"] == 3 and doc["boot_reps"] == 50

    def test_noeffect_parity(self, tmp_path, circ_lin_file):
        path, s = circ_lin_file
        doc = self.run_json(tmp_path, ["test", path, "--scenario", "circ-lin", "--test", "noeffect", "--param", "2",
                                       "--alpha", "0.01"])
        lib = noeffect_test_circ_lin(s, 2.0)
        assert doc["p_value"] == lib.p_value and doc["alpha"] == 0.01
        assert doc["reject"] == (lib.p_value < 0.01)

    def test_stdout(self, circ_lin_file, capsys):
        path, _ = circ_lin_file
        assert main(["test", path, "--scenario", "circ-lin", "--test", "noeffect", "--param", "2"]) == 0
        assert json.loads(capsys.readouterr().out)["test"] == "noeffect"


class TestExitCodes:
    def base(self, path, scenario="circ-lin", test="noeffect"):
        return ["test", path, "--scenario", scenario, "--test", test]

    def test_missing_group_column(self, circ_lin_file):
        path, _ = circ_lin_file
        assert main(self.base(path, test="equality") + ["--param", "1"]) == EXIT_USAGE

    def test_chi2_on_circular_response(self, tmp_path):
        s = spec_data("circ-circ", "noeffect", 0.5, 30, 6)
        path = write_csv(tmp_path / "cc.csv", s.predictors, s.responses)
        assert main(self.base(path, "circ-circ") + ["--param", "1", "--calibration", "chi2"]) == EXIT_USAGE

    def test_bootstrap_needs_seed(self, circ_lin_file):
        path, _ = circ_lin_file
        assert main(self.base(path) + ["--param", "1", "--calibration", "bootstrap"]) == EXIT_USAGE

    def test_param_and_cv_exclusive(self, circ_lin_file):
        path, _ = circ_lin_file
        assert main(self.base(path) + ["--param", "1", "--cv"]) == EXIT_USAGE
        assert main(self.base(path)) == EXIT_USAGE

    def test_argparse_error(self, circ_lin_file, capsys):
        path, _ = circ_lin_file
        assert main(["test", path, "--test", "noeffect"]) == EXIT_USAGE
        assert main(["frobnicate"]) == EXIT_USAGE

    def test_missing_file(self, tmp_path):
        assert main(self.base(str(tmp_path / "nope.csv")) + ["--param", "1"]) == EXIT_DATA

    def test_missing_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("angle,response\n1,2\n")
        assert main(self.base(str(path)) + ["--param", "1"]) == EXIT_DATA

    def test_numerical_failure(self, tmp_path):
        # a constant response leaves no residual variation
        path = write_csv(tmp_path / "c.csv", np.linspace(0, 6, 20), np.full(20, 1.0))
        assert main(self.base(path) + ["--param", "1"]) == EXIT_NUMERIC


class TestTrace:
    def trace(self, tmp_path, path, name, *extra):
        csv_out = tmp_path / f"{name}.csv"
        svg_out = tmp_path / f"{name}.svg"
        argv = ["trace", path, "--scenario", "circ-lin", "--test", "equality", "--param-min", "0.5",
                "--param-max", "15", "--param-count", "12", "--out-csv", str(csv_out), "--out-svg", str(svg_out), *extra]
        assert main(argv) == EXIT_OK
        rows = [[float(v) for v in line.split(",")] for line in read_lines(csv_out)[1:]]
        return np.array(rows), csv_out, svg_out

    def test_shape_and_determinism(self, tmp_path, equality_file):
        path, _ = equality_file
        rows, c1, s1 = self.trace(tmp_path, path, "a")
        _, c2, s2 = self.trace(tmp_path, path, "b")
        assert rows.shape == (12, 3)
        assert np.all(np.diff(rows[:, 0]) > 0)
        assert np.all((rows[:, 2] >= 0) & (rows[:, 2] <= 1))
        assert read_bytes(c1) == read_bytes(c2) and read_bytes(s1) == read_bytes(s2)
        svg = s1.read_text()
        assert svg.startswith("<svg") and "<polyline" in svg and "stroke-dasharray" in svg

    def test_identical_groups_stay_above_alpha(self, tmp_path):
        s = spec_data("circ-lin", "noeffect", 0.0, 40, 7)
        x = np.concatenate([s.predictors, s.predictors])
        y = np.concatenate([s.responses, s.responses])
        path = write_csv(tmp_path / "same.csv", x, y, ["a"] * 40 + ["b"] * 40)
        rows, _, _ = self.trace(tmp_path, path, "same")
        assert np.all(rows[:, 2] >= 0.05)

    def test_strongly_different_groups_cross_alpha(self, tmp_path):
        g = spec_data("circ-lin", "equality", 3.0, (50, 50), 8)
        rows, _, _ = self.trace(tmp_path, write_grouped(tmp_path / "diff.csv", g), "diff")
        assert np.any(rows[:, 2] < 0.05)
        lib = [ancova_test_circ_lin(g, k, "equality", "chi2").p_value for k in np.linspace(0.5, 15, 12)]
        assert_allclose(rows[:, 2], lib, rtol=1e-15)

    def test_failures_become_missing(self, tmp_path):
        # constant responses make every point degenerate; the trace still completes
        path = write_csv(tmp_path / "c.csv", np.linspace(0, 6, 20), np.full(20, 1.0), ["a"] * 10 + ["b"] * 10)
        out = tmp_path / "t.csv"
        argv = ["trace", path, "--scenario", "circ-lin", "--test", "equality", "--param-min", "1",
                "--param-max", "2", "--param-count", "3", "--out-csv", str(out)]
        assert main(argv) == EXIT_OK
        assert read_lines(out)[1:] == ["1.0,,", "1.5,,", "2.0,,"]

    def test_bad_range(self, tmp_path, equality_file):
        path, _ = equality_file
        argv = ["trace", path, "--scenario", "circ-lin", "--test", "equality", "--param-min", "5",
                "--param-max", "1", "--param-count", "3", "--out-csv", str(tmp_path / "t.csv")]
        assert main(argv) == EXIT_USAGE
        argv[argv.index("5")] = "0"
        argv[argv.index("3")] = "1"
        assert main(argv) == EXIT_USAGE


class TestSimulate:
    def config(self, tmp_path, doc, name="study.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)

    def test_empty_spec_list(self, tmp_path):
        out = tmp_path / "out.csv"
        assert main(["simulate", self.config(tmp_path, {"specs": []}), "--seed", "1", "--out", str(out)]) == 0
        assert len(read_lines(out)) == 1
        assert json.loads((tmp_path / "out.manifest.json").read_text())["specs"] == []

    def test_parity_and_rerun(self, tmp_path):
        spec = {"scenario": "circ-lin", "test": "noeffect", "beta": 0.3, "n": 30, "mc_reps": 8}
        cfg = self.config(tmp_path, {"specs": [spec]})
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", cfg, "--seed", "5", "--out", str(a)]) == 0
        assert main(["simulate", cfg, "--seed", "5", "--out", str(b), "--workers", "2"]) == 0
        assert read_bytes(a) == read_bytes(b)
        expected = rows_to_csv([rejection_study(ScenarioSpec.from_dict({**spec, "seed": 5}))])
        assert a.read_text() == expected
        manifest = json.loads((tmp_path / "a.manifest.json").read_text())
        rerun = self.config(tmp_path, {"specs": manifest["specs"]}, "rerun.json")
        c = tmp_path / "c.csv"
        assert main(["simulate", rerun, "--seed", "999", "--out", str(c)]) == 0
        assert read_bytes(a) == read_bytes(c)

    @pytest.mark.parametrize(
        "doc",
        [
            {"specs": [], "reps": 3},
            {"specs": [{"scenario": "circ-lin", "test": "noeffect", "beta": 0, "n": 30, "mcreps": 5}]},
            {"specs": [{"scenario": "circ-circ", "test": "noeffect", "beta": 0, "n": 30, "calibration": "chi2"}]},
            {"specs": {}},
            [],
        ],
    )
    def test_invalid_configs(self, tmp_path, doc):
        out = tmp_path / "out.csv"
        assert main(["simulate", self.config(tmp_path, doc), "--seed", "1", "--out", str(out)]) == EXIT_DATA
        assert not out.exists()

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{specs: }")
        assert main(["simulate", str(path), "--seed", "1", "--out", str(tmp_path / "o.csv")]) == EXIT_DATA

    def test_seed_required(self, tmp_path):
        assert main(["simulate", self.config(tmp_path, {"specs": []}), "--out", str(tmp_path / "o.csv")]) == EXIT_USAGE


def test_all_subcommands_byte_identical(tmp_path):
    g = spec_data("circ-circ", "equality", 2.0, (25, 25), 9)
    data = write_grouped(tmp_path / "cc.csv", g)
    cfg = tmp_path / "study.json"
    cfg.write_text(json.dumps({"specs": [{"scenario": "circ-circ", "test": "equality", "beta": 2.0, "n": [20, 20],
                                          "calibration": "bootstrap", "boot_reps": 20, "mc_reps": 3}]}))
    for run in ("1", "2"):
        d = tmp_path / run
        common = [data, "--scenario", "circ-circ"]
        testing = ["--test", "equality", "--boot-reps", "30", "--seed", "4"]
        assert main(["fit", *common, "--cv", "--out", str(d / "fit.csv")]) == 0
        assert main(["test", *common, *testing, "--cv", "--out", str(d / "test.json")]) == 0
        assert main(["trace", *common, *testing, "--param-min", "1", "--param-max", "10", "--param-count", "4",
                     "--out-csv", str(d / "trace.csv"), "--out-svg", str(d / "trace.svg")]) == 0
        assert main(["simulate", str(cfg), "--seed", "3", "--out", str(d / "sim.csv")]) == 0
    names = ["fit.csv", "fit.json", "test.json", "trace.csv", "trace.svg", "sim.csv", "sim.manifest.json"]
    for name in names:
        assert read_bytes(tmp_path / "1" / name) == read_bytes(tmp_path / "2" / name), name
