import math

import numpy as np
import pytest

from obsplace import classify as cl
from obsplace import expr as ex
from obsplace import lds
from obsplace.expr import Interval
from obsplace.model import NdsModel, SensorConfig


def make_model(f_texts, box_pairs, a=None):
    n = len(f_texts)
    return NdsModel(
        a=np.zeros((n, n)) if a is None else np.asarray(a, dtype=float),
        b=np.zeros((n, 1)),
        c_blocks=tuple(np.eye(1) for _ in range(n)),
        f=tuple(ex.parse(t, n) for t in f_texts),
        box=tuple(Interval(lo, hi) for lo, hi in box_pairs),
        partition_x=tuple([1] * n),
        partition_u=tuple([1] + [0] * (n - 1)),
        partition_y=tuple([1] * n),
        u_ss=np.zeros(1),
        sensors=SensorConfig(weights=np.ones(n)),
    )


TWO_PI = 2 * math.pi


class TestLipschitzRowwise:
    def test_sin_cos_rows(self):
        m = make_model(["sin(x1)", "cos(x2)"], [(0, TWO_PI), (0, TWO_PI)])
        out = cl.lipschitz_rowwise(m, method="interval")
        # grid oracle: each row's gradient norm peaks at 1
        assert out.beta_rows[0] == pytest.approx(1.0, abs=1e-3)
        assert out.beta_rows[1] == pytest.approx(1.0, abs=1e-3)
        assert out.beta == pytest.approx(math.sqrt(2.0), abs=2e-3)
        assert out.certificate

    def test_zero_map(self):
        m = make_model(["0", "0"], [(-1, 1), (-1, 1)])
        out = cl.lipschitz_rowwise(m, method="lds")
        assert out.beta == 0.0

    def test_interval_dominates_lds_rowwise(self):
        m = make_model(
            ["x1^2 - x2", "sin(3*x1)*x2"], [(-1.0, 2.0), (0.0, 1.5)]
        )
        by_lds = cl.lipschitz_rowwise(m, method="lds")
        by_interval = cl.lipschitz_rowwise(m, method="interval")
        for est, certified in zip(by_lds.beta_rows, by_interval.beta_rows):
            assert certified >= est - 1e-12

    def test_analytic_input_passthrough(self):
        m = make_model(["0"], [(-1, 1)])
        out = cl.lipschitz_rowwise(m, method="analytic-input", analytic_rows=[0.345])
        assert out.beta == pytest.approx(0.345)
        assert out.method == "analytic-input"

    def test_kinked_model_rejected(self):
        m = make_model(["abs(x1)"], [(-1, 1)])
        with pytest.raises(cl.ClassifyError, match="abs"):
            cl.lipschitz_rowwise(m, method="interval")

    def test_alternative_aggregation_reported(self):
        m = make_model(["sin(x1)", "cos(x2)"], [(0, TWO_PI), (0, TWO_PI)])
        out = cl.lipschitz_rowwise(m, method="interval")
        assert out.diagnostics["aggregate_rule"] == "sqrt_sum_of_squares"
        assert out.diagnostics["aggregate_sqrt_of_plain_sum"] == pytest.approx(
            math.sqrt(sum(out.beta_rows)), abs=1e-12
        )


class TestJacobianBounds:
    def test_square_row(self):
        m = make_model(["x1^2"], [(-1.0, 2.0)])
        lo, hi = cl.jacobian_bounds(m, method="interval")
        assert lo[0, 0] == pytest.approx(-2.0, abs=1e-3)
        assert hi[0, 0] == pytest.approx(4.0, abs=1e-3)
        assert lo[0, 0] <= -2.0 <= 4.0 <= hi[0, 0]

    def test_linear_rows_are_exact(self):
        m = make_model(["2*x1 - 0.5*x2", "x1"], [(-1, 1), (-1, 1)])
        lo, hi = cl.jacobian_bounds(m, method="interval")
        assert lo[0, 0] == hi[0, 0] == 2.0
        assert lo[0, 1] == hi[0, 1] == -0.5
        assert lo[1, 0] == hi[1, 0] == 1.0
        assert lo[1, 1] == hi[1, 1] == 0.0

    def test_bilinear_row(self):
        m = make_model(["x1*x2", "0"], [(0, 1), (0, 1)])
        lo, hi = cl.jacobian_bounds(m, method="interval")
        assert hi[0, 1] == pytest.approx(1.0, abs=1e-3)
        assert lo[0, 1] == pytest.approx(0.0, abs=1e-3)

    def test_lipschitz_dominated_by_jacobian_norms(self):
        m = make_model(
            ["sin(x1) + 0.3*x2^2", "x1*x2"], [(-1.0, 1.0), (-0.5, 2.0)]
        )
        settings = cl.EstimatorSettings(eps_h=1e-6)
        out = cl.lipschitz_rowwise(m, method="interval", settings=settings)
        lo, hi = cl.jacobian_bounds(m, method="interval", settings=settings)
        bound = math.sqrt(float(np.sum(np.maximum(np.abs(lo), np.abs(hi)) ** 2)))
        assert out.beta <= bound + 1e-9


class TestOsl:
    def test_monotone_decreasing_cubic(self):
        m = make_model(["-x1^3"], [(0.0, 2.0)])
        out = cl.osl_constant(m)
        assert out.rho <= 1e-12
        assert out.rho >= -0.05
        assert not out.certificate

    def test_linear_map_exact(self):
        m = make_model(["0.7*x1"], [(-1.0, 1.0)])
        out = cl.osl_constant(m)
        assert out.rho == pytest.approx(0.7, abs=1e-12)

    def test_dominated_by_lipschitz(self):
        m = make_model(["sin(2*x1)", "x1 - x2^2"], [(-1, 1), (-1, 1)])
        rho = cl.osl_constant(m).rho
        beta = cl.lipschitz_rowwise(m, method="interval").beta
        assert rho <= beta + 2e-2


class TestQib:
    def test_linear_map(self):
        m = make_model(["0.9*x1"], [(-1.0, 1.0)])
        out = cl.qib_constants(m)
        d1, d2 = out.delta1, out.delta2
        # (a^2, 0) dominates and validates exactly for f = a x,
        # up to the 2% safety pad on delta1
        assert d1 * 1.0 + d2 * 0.9 >= 0.81 - 1e-9
        assert d1 + abs(d2) <= 0.81 * 1.02 + 1e-6

    def test_zero_map(self):
        m = make_model(["0"], [(-1.0, 1.0)])
        out = cl.qib_constants(m)
        assert out.delta1 == pytest.approx(0.0, abs=1e-12)
        assert out.delta2 == pytest.approx(0.0, abs=1e-12)

    def test_square_at_zero_delta2(self):
        m = make_model(["x1^2"], [(0.0, 1.0)])
        out = cl.qib_constants(m, delta2_grid=(0.0,))
        # closed form: sup (x + x')^2 over the box is 4
        assert out.delta1 == pytest.approx(4.0, abs=0.1)

    def test_validation_holds_on_fresh_pairs(self):
        m = make_model(["sin(x1)*x2", "x1^2 - x2"], [(-1, 1), (0, 2)])
        out = cl.qib_constants(m)
        f = m.f_vector()
        seq = lds.generate("random", 4, 10_000, seed=777)
        lo, hi = m.box_lo(), m.box_hi()
        pts = np.concatenate([lo, lo]) + seq.points * np.concatenate([hi - lo, hi - lo])
        for p in pts:
            x, x_hat = p[:2], p[2:]
            dx = x - x_hat
            if np.linalg.norm(dx) < 1e-9:
                continue
            df = f(x) - f(x_hat)
            slack = out.delta1 * (dx @ dx) + out.delta2 * (df @ dx) - df @ df
            assert slack >= -1e-9


class TestEmpiricalSoundness:
    def test_certified_lipschitz_has_zero_violations(self):
        m = make_model(["sin(x1) + x2^2", "x1*x2"], [(-1.5, 1.0), (-1.0, 2.0)])
        beta = cl.lipschitz_rowwise(m, method="interval").beta
        f = m.f_vector()
        seq = lds.generate("random", 4, 10_000, seed=31)
        lo, hi = m.box_lo(), m.box_hi()
        pts = np.concatenate([lo, lo]) + seq.points * np.concatenate([hi - lo, hi - lo])
        for p in pts:
            x, x_hat = p[:2], p[2:]
            if np.linalg.norm(x - x_hat) < 1e-12:
                continue
            lhs = np.linalg.norm(f(x) - f(x_hat))
            rhs = beta * np.linalg.norm(x - x_hat)
            assert lhs <= rhs


class TestReportRoundTrip:
    def test_round_trip(self):
        m = make_model(["x1^2"], [(0.0, 1.0)])
        out = cl.lipschitz_rowwise(m, method="interval").params()
        doc = cl.params_to_dict(out)
        back = cl.params_from_dict(doc)
        assert back.class_tag == "Lipschitz"
        assert back.beta == out.beta
        assert back.certificate
