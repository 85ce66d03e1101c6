import math

import numpy as np
import pytest

from obsplace import expr as ex
from obsplace import intervalopt as iopt
from obsplace.expr import Interval


class TestSplit:
    def test_widest_side(self):
        left, right = iopt.split((Interval(0, 4), Interval(0, 1)))
        assert left == (Interval(0, 2), Interval(0, 1))
        assert right == (Interval(2, 4), Interval(0, 1))

    def test_tie_breaks_to_first_coordinate(self):
        left, right = iopt.split((Interval(0, 1), Interval(0, 1)))
        assert left[0] == Interval(0, 0.5) and left[1] == Interval(0, 1)

    def test_atomic_box_rejected(self):
        with pytest.raises(iopt.AtomicBoxError):
            iopt.split((Interval(0, 0.5), Interval(0, 0.5)), eps_x=1.0)


class TestPrune:
    def test_discards_dominated_box(self):
        cover = iopt.Cover(
            entries=[
                iopt._Entry((Interval(0, 1),), Interval(0, 3)),
                iopt._Entry((Interval(1, 2),), Interval(5, 6)),
            ],
            lower=4.0,
            upper=6.0,
        )
        out = iopt.prune(cover)
        assert len(out.entries) == 1
        assert out.entries[0].enclosure == Interval(5, 6)

    def test_vacuous_without_lower_bound(self):
        cover = iopt.Cover(
            entries=[iopt._Entry((Interval(0, 1),), Interval(-2, -1))],
            lower=-math.inf,
            upper=-1.0,
        )
        assert len(iopt.prune(cover).entries) == 1

    def test_witness_box_always_survives(self):
        # the witness value was computed exactly inside some box, so that
        # box's enclosure top is >= lower by inclusion
        witness_box = iopt._Entry((Interval(0, 1),), Interval(3.5, 4.0))
        cover = iopt.Cover(entries=[witness_box], lower=4.0, upper=4.0)
        assert len(iopt.prune(cover).entries) == 1


class TestMaximize:
    def test_endpoint_maximum_tight_bracket(self):
        out = iopt.maximize(ex.parse("abs(2*x1)", 1), [Interval(-1, 2)], eps_h=1e-6)
        assert out.lower <= 4.0 <= out.upper
        assert out.gap <= 1e-6

    def test_abs_cos_brackets_one(self):
        out = iopt.maximize(ex.parse("abs(cos(x1))", 1), [Interval(0, 2 * math.pi)], eps_h=1e-4)
        # dense-grid oracle: max |cos| = 1 on a full period
        grid = np.linspace(0, 2 * math.pi, 100_001)
        oracle = np.max(np.abs(np.cos(grid)))
        assert out.lower <= oracle + 1e-9
        assert out.upper >= oracle
        assert out.gap <= 1e-4

    def test_constant_objective(self):
        out = iopt.maximize(ex.parse("7", 1), [Interval(-5, 5)], eps_h=1e-6)
        assert out.lower == 7.0
        assert out.upper == pytest.approx(7.0, abs=1e-12)
        assert out.iterations == 0

    def test_budget_flag_is_sound(self):
        out = iopt.maximize(
            ex.parse("sin(11*x1)*cos(7*x2)", 2),
            [Interval(0, 3), Interval(0, 3)],
            eps_h=1e-10,
            max_boxes=25,
        )
        assert out.budget_limited
        assert out.lower <= 1.0 <= out.upper + 1e-12

    def test_monotone_convergence(self):
        trace: list[tuple[float, float]] = []
        iopt.maximize(
            ex.parse("x1^2 - x1^3 + sin(3*x1)", 1),
            [Interval(-1, 1.5)],
            eps_h=1e-8,
            trace=trace,
        )
        lows = [t[0] for t in trace]
        ups = [t[1] for t in trace]
        assert all(a <= b + 1e-15 for a, b in zip(lows, lows[1:]))
        assert all(a >= b - 1e-15 for a, b in zip(ups, ups[1:]))

    def test_domain_violation_propagates(self):
        with pytest.raises(ex.DomainError):
            iopt.maximize(ex.parse("1/x1", 1), [Interval(-1, 1)], eps_h=1e-4)

    def test_uninvolved_dimensions_are_not_split(self):
        # objective only uses x1; a wide x2 must not slow convergence
        out = iopt.maximize(
            ex.parse("x1^2", 2), [Interval(-1, 2), Interval(-1e6, 1e6)], eps_h=1e-6
        )
        assert out.gap <= 1e-6
        assert out.iterations < 200

    def test_random_polynomials_against_grid(self):
        # 1e6 grid points resolve a univariate polynomial maximum to well
        # under 1e-9, which a coarser multivariate grid would not
        rng = np.random.default_rng(2718)
        for _ in range(50):
            coeffs = rng.uniform(-2, 2, size=5)
            text = (
                f"{coeffs[0]:.4f} + {coeffs[1]:.4f}*x1 + {coeffs[2]:.4f}*x1^2 "
                f"+ {coeffs[3]:.4f}*x1^3 + {coeffs[4]:.4f}*x1^4"
            )
            lo = float(rng.uniform(-2.0, 0.0))
            box = [Interval(lo, lo + float(rng.uniform(1.0, 3.0)))]
            e = ex.parse(text, 1)
            out = iopt.maximize(e, box, eps_h=1e-6)
            pts = np.linspace(box[0].lo, box[0].hi, 1_000_000).reshape(-1, 1)
            grid_max = float(np.max(ex.eval_batch(e, pts)))
            assert out.lower - 1e-9 <= grid_max <= out.upper + 1e-9
