import json

import numpy as np
import pytest

from obsplace import model as mod
from obsplace.model import NdsModel, SensorConfig, column_sensor_map, expand_gamma


def linear_2state_doc():
    return {
        "n_x": 2,
        "n_u": 1,
        "N": 2,
        "partition_x": [1, 1],
        "partition_u": [1, 0],
        "partition_y": [1, 1],
        "A": [-1.0, 0.0, 0.5, -2.0],
        "B": [1.0, 0.0],
        "C_blocks": [[1.0], [1.0]],
        "f": ["0", "0"],
        "box_lo": [-1.0, -1.0],
        "box_hi": [1.0, 1.0],
        "u_ss": [0.0],
        "weights_c": [1.0, 1.0],
        "logistic": {"k_min": 0, "k_max": 2, "force_on": [], "force_off": []},
    }


class TestLoadModel:
    def test_zero_nonlinearity(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps(linear_2state_doc()))
        m = mod.load_model(p)
        assert m.n_x == 2 and m.n_nodes == 2
        assert m.f_vector()(np.array([0.3, -0.2])) == pytest.approx([0.0, 0.0])

    def test_partition_mismatch(self, tmp_path):
        doc = linear_2state_doc()
        doc["partition_x"] = [2, 1]
        p = tmp_path / "m.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(mod.ModelError, match="partition_x"):
            mod.load_model(p)

    def test_empty_box(self, tmp_path):
        doc = linear_2state_doc()
        doc["box_lo"] = [2.0, -1.0]
        p = tmp_path / "m.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(mod.ModelError, match="empty"):
            mod.load_model(p)

    def test_missing_key(self, tmp_path):
        doc = linear_2state_doc()
        del doc["weights_c"]
        p = tmp_path / "m.json"
        p.write_text(json.dumps(doc))
        with pytest.raises(mod.ModelError, match="missing"):
            mod.load_model(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(mod.ModelError, match="cannot read"):
            mod.load_model(tmp_path / "nope.json")

    def test_round_trip(self, tmp_path):
        doc = linear_2state_doc()
        p = tmp_path / "m.json"
        p.write_text(json.dumps(doc))
        m = mod.load_model(p)
        q = tmp_path / "again.json"
        mod.save_model(m, q)
        m2 = mod.load_model(q)
        assert np.array_equal(m.a, m2.a)
        assert m.f == m2.f
        assert np.array_equal(m.sensors.weights, m2.sensors.weights)
        assert (m.sensors.k_min, m.sensors.k_max) == (m2.sensors.k_min, m2.sensors.k_max)
        assert m.sensors.force_on == m2.sensors.force_on
        assert m.sensors.force_off == m2.sensors.force_off


class TestExpandGamma:
    def test_unit_blocks(self):
        out = expand_gamma([1, 0], [1, 1])
        assert np.array_equal(out.matrix, np.diag([1.0, 0.0]))

    def test_single_wide_block(self):
        out = expand_gamma([1], [3])
        assert np.array_equal(out.matrix, np.eye(3))

    def test_last_of_sixteen(self):
        gamma = [0] * 15 + [1]
        out = expand_gamma(gamma, [1] * 16)
        expect = np.zeros((16, 16))
        expect[15, 15] = 1.0
        assert np.array_equal(out.matrix, expect)

    def test_idempotent(self):
        out = expand_gamma([1, 0, 1], [2, 1, 3]).matrix
        assert np.array_equal(out @ out, out)

    def test_all_on_and_all_off(self):
        assert np.array_equal(expand_gamma([1, 1], [2, 2]).matrix, np.eye(4))
        assert np.array_equal(expand_gamma([0, 0], [2, 2]).matrix, np.zeros((4, 4)))

    def test_length_check(self):
        with pytest.raises(mod.ModelError):
            expand_gamma([1, 0, 1], [1, 1])


class TestColumnSensorMap:
    def test_unit_blocks(self):
        assert column_sensor_map([1, 1, 1]) == [0, 1, 2]

    def test_wide_first_block(self):
        assert column_sensor_map([2, 1]) == [0, 0, 1]

    def test_sixteen_identity(self):
        assert column_sensor_map([1] * 16) == list(range(16))

    def test_column_scaling_matches_dense_product(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            part = [int(rng.integers(1, 4)) for _ in range(int(rng.integers(1, 5)))]
            n_y = sum(part)
            gamma = [int(rng.integers(0, 2)) for _ in part]
            y = rng.normal(size=(3, n_y))
            dense = y @ expand_gamma(gamma, part).matrix
            owners = column_sensor_map(part)
            scaled = y * np.array([gamma[o] for o in owners])[None, :]
            assert np.allclose(dense, scaled)


class TestSensorConfig:
    def test_admits(self):
        cfg = SensorConfig(weights=[1, 1, 1], k_min=1, k_max=2, force_on=frozenset({0}))
        assert cfg.admits([1, 0, 0])
        assert cfg.admits([1, 1, 0])
        assert not cfg.admits([0, 1, 0])  # violates force_on
        assert not cfg.admits([1, 1, 1])  # above k_max

    def test_conflicting_forced_sets(self):
        with pytest.raises(mod.ModelError):
            SensorConfig(weights=[1, 1], force_on=frozenset({0}), force_off=frozenset({0}))

    def test_contradictory_window(self):
        with pytest.raises(mod.ModelError):
            SensorConfig(weights=[1, 1], k_min=2, force_off=frozenset({0}))
