import numpy as np
import pytest
import scipy.linalg

from obsplace import sdp
from obsplace.sdp import ProblemBuilder, SolverOptions


def sym_entries(n):
    """Upper-triangle index pairs for a symmetric matrix variable."""
    return [(a, b) for a in range(n) for b in range(a, n)]


def sym_basis(n, a, b):
    s = np.zeros((n, n))
    s[a, b] = 1.0
    s[b, a] = 1.0
    return s


def lyapunov_problem(a_mat, rhs_eye=1.0, p_floor=1e-6):
    """Feasibility: A'P + PA <= -rhs_eye * I with P >= p_floor * I."""
    n = a_mat.shape[0]
    pb = ProblemBuilder()
    pvars = {}
    for (i, j) in sym_entries(n):
        pvars[(i, j)] = pb.add_var(f"p{i}{j}")
    lyap = {}
    floor = {}
    for (i, j), k in pvars.items():
        s = sym_basis(n, i, j)
        lyap[k] = a_mat.T @ s + s @ a_mat
        floor[k] = -s
    pb.add_block(rhs_eye * np.eye(n), lyap, name="lyapunov")
    pb.add_block(p_floor * np.eye(n), floor, name="p_floor")
    return pb.build(), pvars


class TestScalarProblems:
    def test_min_z_above_one(self):
        pb = ProblemBuilder()
        z = pb.add_var("z")
        pb.set_objective({z: 1.0})
        pb.add_block(np.array([[1.0]]), {z: np.array([[-1.0]])})
        out = sdp.solve(pb.build())
        assert out.status == sdp.OPTIMAL
        assert out.z[z] == pytest.approx(1.0, abs=1e-5)
        assert out.objective == pytest.approx(1.0, abs=1e-5)

    def test_contradictory_scalar_blocks(self):
        pb = ProblemBuilder()
        z = pb.add_var("z")
        pb.add_block(np.array([[0.0]]), {z: np.array([[1.0]])})    # z <= 0
        pb.add_block(np.array([[1.0]]), {z: np.array([[-1.0]])})   # z >= 1
        out = sdp.solve(pb.build())
        assert out.status == sdp.INFEASIBLE

    def test_lp_corner(self):
        # min -x - y st x + y <= 1, 0 <= x,y — optimum at the x+y edge
        pb = ProblemBuilder()
        x = pb.add_var("x", lb=0.0)
        y = pb.add_var("y", lb=0.0)
        pb.set_objective({x: -1.0, y: -1.0})
        pb.add_row({x: 1.0, y: 1.0}, 1.0)
        out = sdp.solve(pb.build())
        assert out.status == sdp.OPTIMAL
        assert out.z[x] + out.z[y] == pytest.approx(1.0, abs=1e-5)
        assert out.objective == pytest.approx(-1.0, abs=1e-5)


class TestFeasibilityPhase:
    def test_strictly_feasible_toy(self):
        problem, _ = lyapunov_problem(np.array([[-1.0, 0.5], [0.0, -1.0]]))
        feas = sdp.feasibility_phase(problem)
        assert feas.t_star < 0

    def test_marginal_point_constraint(self):
        # z >= 0 and z <= 0 leaves only the boundary point
        pb = ProblemBuilder()
        z = pb.add_var("z")
        pb.add_row({z: 1.0}, 0.0)
        pb.add_row({z: -1.0}, 0.0)
        feas = sdp.feasibility_phase(pb.build())
        assert abs(feas.t_star) <= 1e-6

    def test_contradictory_rows_midpoint_slack(self):
        pb = ProblemBuilder()
        z = pb.add_var("z")
        pb.add_row({z: 1.0}, 0.0)    # z <= 0
        pb.add_row({z: -1.0}, -1.0)  # z >= 1
        feas = sdp.feasibility_phase(pb.build())
        assert feas.t_star >= 0.5 - 1e-6
        assert feas.t_star == pytest.approx(0.5, abs=1e-4)


class TestLyapunov:
    def test_feasible_stable_matrix(self):
        a = np.array([[-1.0, 0.5], [0.0, -1.0]])
        problem, pvars = lyapunov_problem(a)
        out = sdp.solve(problem)
        assert out.status == sdp.OPTIMAL
        assert out.residual <= 1e-7
        # oracle: the exact Lyapunov solution solves A'P + PA = -2I and
        # must itself be feasible for the relaxed inequality
        p_exact = scipy.linalg.solve_lyapunov(a.T, -2.0 * np.eye(2))
        z_oracle = np.zeros(problem.n_vars)
        for (i, j), k in pvars.items():
            z_oracle[k] = p_exact[i, j]
        rep = sdp.verify(problem, z_oracle)
        assert rep.max_residual <= 1e-9

    def test_unstable_matrix_infeasible(self):
        a = np.array([[1.0, 0.0], [0.0, -1.0]])
        problem, _ = lyapunov_problem(a)
        out = sdp.solve(problem)
        assert out.status == sdp.INFEASIBLE

    def test_verify_flags_perturbation(self):
        # tight instance: the optimum sits exactly on its scalar constraint
        pb = ProblemBuilder()
        z = pb.add_var("z")
        pb.set_objective({z: 1.0})
        pb.add_block(np.array([[1.0]]), {z: np.array([[-1.0]])})
        problem = pb.build()
        out = sdp.solve(problem)
        assert sdp.verify(problem, out.z).max_residual <= 1e-7
        rep = sdp.verify(problem, out.z - 1e-2)
        assert rep.max_residual > 1e-7

    def test_verify_empty_problem(self):
        pb = ProblemBuilder()
        pb.add_var("z")
        rep = sdp.verify(pb.build(), np.zeros(1))
        assert rep.block_residuals == []


class TestInvariants:
    def test_scale_invariance(self):
        a = np.array([[-2.0, 1.0], [0.0, -1.5]])
        problem, _ = lyapunov_problem(a)
        # pin the scale so the comparison is meaningful: trace(P) <= 10
        idx_diag = [k for k, name in enumerate(problem.var_names) if name in ("p00", "p11")]
        problem.lin_f = np.vstack([problem.lin_f, np.eye(problem.n_vars)[idx_diag].sum(axis=0)])
        problem.lin_g = np.append(problem.lin_g, 10.0)
        problem.c_obj = np.zeros(problem.n_vars)
        problem.c_obj[idx_diag] = 1.0  # minimize trace(P)
        base = sdp.solve(problem)
        scaled_blocks = [
            sdp.LmiBlock(10.0 * b.m0, {k: 10.0 * m for k, m in b.coeffs.items()}, b.name)
            for b in problem.blocks
        ]
        import dataclasses

        scaled = dataclasses.replace(problem, blocks=scaled_blocks)
        out = sdp.solve(scaled)
        assert out.status == base.status == sdp.OPTIMAL
        assert np.allclose(out.z, base.z, rtol=1e-5, atol=1e-7)

    def test_tightening_bound_never_improves(self):
        pb = ProblemBuilder()
        x = pb.add_var("x", lb=0.0, ub=5.0)
        pb.set_objective({x: 1.0})
        pb.add_row({x: -1.0}, -1.0)  # x >= 1
        loose = sdp.solve(pb.build())
        pb2 = ProblemBuilder()
        x2 = pb2.add_var("x", lb=2.0, ub=5.0)
        pb2.set_objective({x2: 1.0})
        pb2.add_row({x2: -1.0}, -1.0)
        tight = sdp.solve(pb2.build())
        assert tight.objective >= loose.objective - 1e-7

    def test_self_consistency_across_corpus(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            n = int(rng.integers(2, 4))
            a = rng.normal(size=(n, n))
            a -= (np.max(np.real(np.linalg.eigvals(a))) + 0.5) * np.eye(n)
            problem, _ = lyapunov_problem(a)
            out = sdp.solve(problem)
            assert out.status == sdp.OPTIMAL
            rep = sdp.verify(problem, out.z)
            assert rep.max_residual <= 1e-7


class TestSlacked:
    def test_slack_admits_marginal_point(self):
        pb = ProblemBuilder()
        z = pb.add_var("z")
        pb.add_row({z: 1.0}, 0.0)
        pb.add_row({z: -1.0}, 0.0)
        relaxed = sdp.slacked(pb.build(), 1e-4)
        feas = sdp.feasibility_phase(relaxed)
        assert feas.t_star <= -5e-5  # interior of width 1e-4 opened up
