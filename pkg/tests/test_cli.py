import json

import numpy as np
import pytest

from obsplace import cli
from obsplace.model import save_model
from obsplace.traffic import build_traffic_model, small_experiment_config

from placement_helpers import linear_model


@pytest.fixture()
def small_model_file(tmp_path):
    model = build_traffic_model(small_experiment_config())
    path = tmp_path / "model.json"
    save_model(model, path)
    return path


@pytest.fixture()
def toy_model_file(tmp_path):
    model = linear_model(np.array([[-2.0, 0.0], [0.0, 1.0]]), k_max=1)
    path = tmp_path / "toy.json"
    save_model(model, path)
    return path


def run(argv):
    return cli.main([str(a) for a in argv])


class TestParameterize:
    def test_interval_lipschitz(self, small_model_file, tmp_path):
        out = tmp_path / "params.json"
        code = run(["parameterize", small_model_file, "--class", "lipschitz",
                    "--method", "interval", "-o", out])
        assert code == cli.EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["certificate"] is True
        assert doc["constants"]["beta"] > 0
        assert (tmp_path / "params.manifest.json").exists()

    def test_lds_is_deterministic(self, small_model_file, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            code = run(["parameterize", small_model_file, "--class", "lipschitz",
                        "--method", "lds", "--seed", 7, "--samples", 2048, "-o", out])
            assert code == cli.EXIT_OK
            outs.append(json.loads(out.read_text())["constants"]["beta"])
        assert outs[0] == outs[1]

    def test_missing_model(self, tmp_path):
        code = run(["parameterize", tmp_path / "none.json", "--class", "lipschitz"])
        assert code == cli.EXIT_IO


class TestPlace:
    def test_toy_pipeline(self, toy_model_file, tmp_path):
        params = tmp_path / "params.json"
        assert run(["parameterize", toy_model_file, "--class", "lipschitz",
                    "--method", "interval", "-o", params]) == cli.EXIT_OK
        placement = tmp_path / "placement.json"
        code = run(["place", toy_model_file, params, "-o", placement,
                    "--dump-sdp", tmp_path / "sdp.json"])
        assert code == cli.EXIT_OK
        doc = json.loads(placement.read_text())
        assert doc["gamma"] == [0, 1]
        assert (tmp_path / "sdp.json").exists()

    def test_infeasible_cardinality(self, tmp_path):
        model = linear_model(np.diag([1.0, 1.0]), k_max=1)  # two unstable modes, one sensor
        path = tmp_path / "m.json"
        save_model(model, path)
        params = tmp_path / "p.json"
        assert run(["parameterize", path, "--class", "lipschitz",
                    "--method", "interval", "-o", params]) == cli.EXIT_OK
        code = run(["place", path, params, "-o", tmp_path / "out.json"])
        assert code == cli.EXIT_INFEASIBLE

    def test_bounded_jacobian_needs_w(self, toy_model_file, tmp_path):
        params = tmp_path / "p.json"
        assert run(["parameterize", toy_model_file, "--class", "bounded-jacobian",
                    "--method", "interval", "-o", params]) == cli.EXIT_OK
        code = run(["place", toy_model_file, params, "--variant", "bounded-jacobian",
                    "-o", tmp_path / "out.json"])
        assert code == cli.EXIT_IO


class TestSimulate:
    def test_traces_and_determinism(self, toy_model_file, tmp_path):
        params = tmp_path / "params.json"
        run(["parameterize", toy_model_file, "--class", "lipschitz",
             "--method", "interval", "-o", params])
        placement = tmp_path / "placement.json"
        run(["place", toy_model_file, params, "-o", placement])
        for name in ("sim1", "sim2"):
            code = run(["simulate", toy_model_file, placement,
                        "--t-final", 20, "--step", 0.01,
                        "--x0-seed", 3, "--out-dir", tmp_path / name])
            assert code == cli.EXIT_OK
        a = (tmp_path / "sim1" / "plant.csv").read_text()
        b = (tmp_path / "sim2" / "plant.csv").read_text()
        assert a == b
        summary = json.loads((tmp_path / "sim1" / "summary.json").read_text())
        assert summary["final_relative_error"] < 1.0

    def test_hand_edited_gain_rejected(self, toy_model_file, tmp_path):
        params = tmp_path / "params.json"
        run(["parameterize", toy_model_file, "--class", "lipschitz",
             "--method", "interval", "-o", params])
        placement = tmp_path / "placement.json"
        run(["place", toy_model_file, params, "-o", placement])
        doc = json.loads(placement.read_text())
        doc["gain"][0][0] = 5.0  # column of an unselected sensor
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        code = run(["simulate", toy_model_file, bad, "--out-dir", tmp_path / "simx"])
        assert code == cli.EXIT_IO


class TestTrafficDemo:
    def test_small_scale_end_to_end(self, tmp_path):
        out_dir = tmp_path / "demo"
        code = run(["traffic-demo", "--scale", "small", "--method", "analytic",
                    "--t-final", 400, "--out-dir", out_dir])
        assert code == cli.EXIT_OK
        for name in ("model.json", "model.metadata.json", "params.json",
                     "placement.json", "plant.csv", "observer.csv", "error.csv",
                     "summary.json", "demo.manifest.json"):
            assert (out_dir / name).exists(), name
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["certificate"]["lambda_max"] <= 1e-6
        assert summary["certificate"]["lambda_min_p"] > 0

    def test_usage_error_exit_code(self):
        assert run(["traffic-demo", "--scale", "nonsense"]) == cli.EXIT_IO
