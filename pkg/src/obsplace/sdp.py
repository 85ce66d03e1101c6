"""Dense linear-matrix-inequality solver.

Minimizes a linear objective subject to LMI blocks (affine in the decision
vector, required negative semidefinite), linear inequality rows and
variable bounds.  The engine is a log-det barrier with damped Newton steps:
a feasibility phase first minimizes the largest constraint violation, then
a path-following phase drives the objective down along the central path.
Problem sizes here are small (blocks of a few dozen rows, a few hundred
scalars), so robustness and auditability win over asymptotic speed; every
gradient and Hessian goes through symmetric eigenstructure, and every
"Optimal" answer can be re-checked post hoc with :func:`verify`.

Scalar (1x1) blocks are folded into the linear rows internally; both forms
are equivalent barriers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.linalg

__all__ = [
    "LmiBlock",
    "SdpProblem",
    "SdpSolution",
    "SolverOptions",
    "FeasibilityResult",
    "VerifyReport",
    "ProblemBuilder",
    "solve",
    "feasibility_phase",
    "verify",
    "slacked",
]

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
BUDGET = "BudgetExceeded"
TROUBLE = "NumericalTrouble"


class SdpError(Exception):
    pass


@dataclass(frozen=True)
class LmiBlock:
    """One affine matrix constraint  M0 + sum_k z_k * M_k <= 0  (psd order).

    ``hard`` blocks encode strictness floors (like P >= mu*I): the
    feasibility phase never relaxes them, so a caller-provided initial
    point must already satisfy them strictly.
    """

    m0: np.ndarray
    coeffs: dict[int, np.ndarray]
    name: str = ""
    hard: bool = False

    def __post_init__(self):
        m0 = np.asarray(self.m0, dtype=float)
        object.__setattr__(self, "m0", 0.5 * (m0 + m0.T))
        fixed = {}
        for k, mat in self.coeffs.items():
            mat = np.asarray(mat, dtype=float)
            if mat.shape != m0.shape:
                raise SdpError(f"coefficient for variable {k} has shape {mat.shape}, block is {m0.shape}")
            fixed[int(k)] = 0.5 * (mat + mat.T)
        object.__setattr__(self, "coeffs", fixed)

    @property
    def dim(self) -> int:
        return self.m0.shape[0]

    def evaluate(self, z: np.ndarray) -> np.ndarray:
        out = self.m0.copy()
        for k, mat in self.coeffs.items():
            out += z[k] * mat
        return out


@dataclass
class SdpProblem:
    """Decision vector z, objective c.z + const, LMI blocks, rows F z <= g,
    and box bounds (entries may be infinite; the solver substitutes a wide
    default so the barrier stays well posed)."""

    n_vars: int
    c_obj: np.ndarray
    blocks: list[LmiBlock] = field(default_factory=list)
    lin_f: np.ndarray | None = None
    lin_g: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    var_names: list[str] | None = None
    obj_const: float = 0.0
    initial_hint: np.ndarray | None = None

    def __post_init__(self):
        self.c_obj = np.asarray(self.c_obj, dtype=float)
        if self.c_obj.shape != (self.n_vars,):
            raise SdpError("objective length must match n_vars")
        if self.lin_f is None:
            self.lin_f = np.zeros((0, self.n_vars))
            self.lin_g = np.zeros(0)
        self.lin_f = np.asarray(self.lin_f, dtype=float).reshape(-1, self.n_vars)
        self.lin_g = np.asarray(self.lin_g, dtype=float).reshape(-1)
        if self.lin_f.shape[0] != self.lin_g.shape[0]:
            raise SdpError("row matrix and right-hand side disagree")
        self.lb = np.full(self.n_vars, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float)
        self.ub = np.full(self.n_vars, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float)
        if np.any(self.lb > self.ub):
            raise SdpError("lower bound exceeds upper bound")
        for blk in self.blocks:
            for k in blk.coeffs:
                if not (0 <= k < self.n_vars):
                    raise SdpError(f"block coefficient for unknown variable {k}")

    def name_of(self, k: int) -> str:
        if self.var_names and k < len(self.var_names):
            return self.var_names[k]
        return f"z{k}"


def slacked(problem: SdpProblem, s: float) -> SdpProblem:
    """Relax every soft block to <= s*I and every row to <= g + s.
    Variable bounds and hard blocks stay untouched."""
    if s == 0.0:
        return problem
    blocks = [
        blk if blk.hard else LmiBlock(blk.m0 - s * np.eye(blk.dim), blk.coeffs, blk.name)
        for blk in problem.blocks
    ]
    return replace(problem, blocks=blocks, lin_g=problem.lin_g + s)


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-7
    gap_tol: float = 1e-6
    infeas_margin: float = 1e-6
    max_newton: int = 200          # per barrier phase
    barrier_increase: float = 20.0
    center_tol: float = 1e-4       # Newton decrement^2/2 at which a centering stops
    phase1_exit: float = 1e-3      # stop phase I early once this strictly feasible
    default_bound: float = 1e8     # stands in for infinite variable bounds
    phase1_gap: float = 1e-9       # absolute accuracy needed on the phase-I optimum


@dataclass
class SdpSolution:
    status: str
    z: np.ndarray | None
    objective: float | None
    residual: float | None
    gap_estimate: float | None
    newton_iterations: int
    phase1_slack: float | None = None
    message: str = ""


@dataclass
class FeasibilityResult:
    """Outcome of the pure feasibility phase: ``t_star`` is the smallest
    uniform slack that satisfies every block and row, ``t_lower`` a certified
    lower bound on it from barrier duality."""

    t_star: float
    t_lower: float
    z: np.ndarray
    newton_iterations: int
    converged: bool


@dataclass(frozen=True)
class VerifyReport:
    block_residuals: list[float]
    row_violation: float
    bound_violation: float

    @property
    def max_residual(self) -> float:
        worst = [self.row_violation, self.bound_violation]
        worst += self.block_residuals
        return max(worst) if worst else 0.0


def verify(problem: SdpProblem, z: np.ndarray, feas_tol: float | None = None) -> VerifyReport:
    """Exact eigenvalue check of a candidate point against every block,
    row and bound of the problem."""
    z = np.asarray(z, dtype=float)
    if z.shape != (problem.n_vars,):
        raise SdpError("candidate point has the wrong length")
    block_res = [float(np.max(scipy.linalg.eigvalsh(blk.evaluate(z)))) for blk in problem.blocks]
    row_v = float(np.max(problem.lin_f @ z - problem.lin_g)) if len(problem.lin_g) else -np.inf
    bound_v = -np.inf
    finite_lb = np.isfinite(problem.lb)
    finite_ub = np.isfinite(problem.ub)
    if np.any(finite_lb):
        bound_v = max(bound_v, float(np.max(problem.lb[finite_lb] - z[finite_lb])))
    if np.any(finite_ub):
        bound_v = max(bound_v, float(np.max(z[finite_ub] - problem.ub[finite_ub])))
    return VerifyReport(block_residuals=block_res, row_violation=row_v, bound_violation=bound_v)


# ---------------------------------------------------------------------------
# Barrier internals
# ---------------------------------------------------------------------------


class _Barrier:
    """Preprocessed data for the log-det barrier of one problem."""

    def __init__(self, problem: SdpProblem, opts: SolverOptions):
        self.n = problem.n_vars
        self.opts = opts
        rows_f = [problem.lin_f]
        rows_g = [problem.lin_g]
        self.blocks: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        for blk in problem.blocks:
            if blk.dim == 1:
                coef = np.zeros(self.n)
                for k, mat in blk.coeffs.items():
                    coef[k] = mat[0, 0]
                rows_f.append(coef.reshape(1, -1))
                rows_g.append(np.array([-blk.m0[0, 0]]))
                continue
            idx = np.array(sorted(blk.coeffs), dtype=int)
            mats = np.stack([blk.coeffs[k] for k in idx]) if len(idx) else np.zeros((0, blk.dim, blk.dim))
            self.blocks.append((blk.m0, idx, mats))
        self.F = np.vstack(rows_f)
        self.g = np.concatenate(rows_g)
        lb = problem.lb.copy()
        ub = problem.ub.copy()
        lb[~np.isfinite(lb)] = -opts.default_bound
        ub[~np.isfinite(ub)] = opts.default_bound
        self.lb, self.ub = lb, ub
        self.m_total = sum(m0.shape[0] for m0, _, _ in self.blocks) + len(self.g) + 2 * self.n

    # -- state ---------------------------------------------------------

    def factorize(self, z: np.ndarray):
        """Cholesky factors of the slack matrices, or None when z is not
        strictly feasible."""
        slack_rows = self.g - self.F @ z
        if np.any(slack_rows <= 0):
            return None
        if np.any(z <= self.lb) or np.any(z >= self.ub):
            return None
        chols = []
        for m0, idx, mats in self.blocks:
            s = -(m0 + np.einsum("k,kij->ij", z[idx], mats)) if len(idx) else -m0
            try:
                chols.append(np.linalg.cholesky(s))
            except np.linalg.LinAlgError:
                return None
        return chols, slack_rows

    def value(self, z: np.ndarray, state) -> float:
        chols, slack_rows = state
        val = -2.0 * sum(float(np.sum(np.log(np.diag(L)))) for L in chols)
        val -= float(np.sum(np.log(slack_rows)))
        val -= float(np.sum(np.log(z - self.lb)) + np.sum(np.log(self.ub - z)))
        return val

    def grad_hess(self, z: np.ndarray, state):
        chols, slack_rows = state
        grad = np.zeros(self.n)
        hess = np.zeros((self.n, self.n))
        for (m0, idx, mats), L in zip(self.blocks, chols):
            if len(idx) == 0:
                continue
            k, m = mats.shape[0], mats.shape[1]
            stacked = mats.transpose(1, 0, 2).reshape(m, k * m)
            b = scipy.linalg.solve_triangular(L, stacked, lower=True)
            b3 = b.reshape(m, k, m).transpose(1, 2, 0).reshape(k, m, m)  # b3[i] = (L^-1 M_i)^T
            stacked_t = b3.transpose(1, 0, 2).reshape(m, k * m)
            a = scipy.linalg.solve_triangular(L, stacked_t, lower=True)
            a3 = a.reshape(m, k, m).transpose(1, 0, 2)  # a3[i] = L^-1 M_i L^-T
            grad[idx] += np.einsum("kii->k", a3)
            flat = a3.reshape(k, m * m)
            hess[np.ix_(idx, idx)] += flat @ flat.T
        inv_rows = 1.0 / slack_rows
        grad += self.F.T @ inv_rows
        hess += (self.F * (inv_rows**2)[:, None]).T @ self.F
        inv_lo = 1.0 / (z - self.lb)
        inv_hi = 1.0 / (self.ub - z)
        grad += -inv_lo + inv_hi
        hess[np.diag_indices(self.n)] += inv_lo**2 + inv_hi**2
        return grad, hess

    def max_step(self, z: np.ndarray, dz: np.ndarray, state) -> float:
        """Largest step keeping rows and bounds strictly feasible; block
        feasibility is probed by Cholesky during the line search."""
        chols, slack_rows = state
        alpha = np.inf
        fd = self.F @ dz
        pos = fd > 0
        if np.any(pos):
            alpha = min(alpha, float(np.min(slack_rows[pos] / fd[pos])))
        neg = dz < 0
        if np.any(neg):
            alpha = min(alpha, float(np.min((z[neg] - self.lb[neg]) / (-dz[neg]))))
        pos = dz > 0
        if np.any(pos):
            alpha = min(alpha, float(np.min((self.ub[pos] - z[pos]) / dz[pos])))
        for (m0, idx, mats), L in zip(self.blocks, chols):
            if len(idx) == 0:
                continue
            d = np.einsum("k,kij->ij", dz[idx], mats)
            w = scipy.linalg.solve_triangular(L, d, lower=True)
            w = scipy.linalg.solve_triangular(L, w.T, lower=True)
            lam = float(np.max(scipy.linalg.eigvalsh(0.5 * (w + w.T))))
            if lam > 0:
                alpha = min(alpha, 1.0 / lam)
        return alpha


def _center(
    bar: _Barrier,
    z: np.ndarray,
    t: float,
    c: np.ndarray,
    budget: int,
    stop_tol: float,
    early_exit=None,
) -> tuple[np.ndarray, int, bool, str]:
    """Damped Newton to the analytic center of t*c.z + barrier."""
    iters = 0
    state = bar.factorize(z)
    if state is None:
        return z, 0, False, "center called from an infeasible point"
    while iters < budget:
        grad_b, hess = bar.grad_hess(z, state)
        grad = t * c + grad_b
        scale = 1.0 / np.sqrt(np.maximum(np.diag(hess), 1e-12))
        hs = hess * scale[None, :] * scale[:, None]
        reg = 0.0
        for attempt in range(6):
            try:
                chol = np.linalg.cholesky(hs + reg * np.eye(bar.n))
                break
            except np.linalg.LinAlgError:
                reg = max(10.0 * reg, 1e-12)
        else:
            return z, iters, False, "hessian factorization failed"
        rhs = -(grad * scale)
        y = scipy.linalg.solve_triangular(chol, rhs, lower=True)
        y = scipy.linalg.solve_triangular(chol.T, y, lower=False)
        dz = y * scale
        decrement2 = float(-grad @ dz)
        if decrement2 <= 2.0 * stop_tol:
            return z, iters, True, ""
        alpha = min(1.0, 0.99 * bar.max_step(z, dz, state))
        merit0 = t * float(c @ z) + bar.value(z, state)
        accepted = False
        for _ in range(60):
            z_try = z + alpha * dz
            state_try = bar.factorize(z_try)
            if state_try is not None:
                merit = t * float(c @ z_try) + bar.value(z_try, state_try)
                if merit <= merit0 - 1e-4 * alpha * decrement2 or merit < merit0:
                    z, state = z_try, state_try
                    accepted = True
                    break
            alpha *= 0.5
        iters += 1
        if not accepted:
            return z, iters, False, "line search stalled"
        if early_exit is not None and early_exit(z):
            return z, iters, True, "early-exit"
    return z, iters, False, "newton budget exhausted"


def _path_follow(
    bar: _Barrier,
    z: np.ndarray,
    c: np.ndarray,
    opts: SolverOptions,
    gap_target,
    early_exit=None,
) -> tuple[np.ndarray, float, int, bool, str]:
    """Increase the barrier parameter until m/t meets gap_target(z)."""
    t = 1.0
    total = 0
    while True:
        budget = opts.max_newton - total
        if budget <= 0:
            return z, t, total, False, "newton budget exhausted"
        z, used, ok, msg = _center(bar, z, t, c, budget, opts.center_tol, early_exit)
        total += used
        if early_exit is not None and early_exit(z):
            return z, t, total, True, "early-exit"
        if not ok:
            return z, t, total, False, msg
        if bar.m_total / t <= gap_target(z):
            return z, t, total, True, ""
        t *= opts.barrier_increase


def _initial_point(problem: SdpProblem, opts: SolverOptions) -> np.ndarray:
    lb = np.where(np.isfinite(problem.lb), problem.lb, -opts.default_bound)
    ub = np.where(np.isfinite(problem.ub), problem.ub, opts.default_bound)
    base = problem.initial_hint if problem.initial_hint is not None else np.zeros(problem.n_vars)
    margin = np.minimum(0.25 * (ub - lb), 1.0)
    return np.clip(base, lb + margin, ub - margin)


def _phase1_problem(problem: SdpProblem, opts: SolverOptions) -> tuple[SdpProblem, int]:
    """Append the uniform slack variable: soft blocks gain -I * s, rows
    gain -s; hard blocks keep their exact form."""
    n = problem.n_vars
    s_idx = n
    blocks = []
    for blk in problem.blocks:
        if blk.hard:
            blocks.append(blk)
            continue
        coeffs = dict(blk.coeffs)
        coeffs[s_idx] = -np.eye(blk.dim)
        blocks.append(LmiBlock(blk.m0, coeffs, blk.name))
    lin_f = np.hstack([problem.lin_f, -np.ones((problem.lin_f.shape[0], 1))])
    c = np.zeros(n + 1)
    c[s_idx] = 1.0
    aug = SdpProblem(
        n_vars=n + 1,
        c_obj=c,
        blocks=blocks,
        lin_f=lin_f,
        lin_g=problem.lin_g.copy(),
        lb=np.append(problem.lb, -np.inf),
        ub=np.append(problem.ub, np.inf),
        var_names=(problem.var_names or []) + ["_slack"] if problem.var_names else None,
    )
    return aug, s_idx


def feasibility_phase(problem: SdpProblem, opts: SolverOptions = SolverOptions()) -> FeasibilityResult:
    """Minimize the uniform slack t with every block shifted to <= t*I and
    every row to <= g + t.  A result with t_star <= 0 hands back a strictly
    feasible point; the duality-based ``t_lower`` certifies infeasibility
    when it stays above the caller's margin."""
    aug, s_idx = _phase1_problem(problem, opts)
    bar = _Barrier(aug, opts)
    start = _initial_point(problem, opts)
    for blk in problem.blocks:
        if blk.hard and float(np.max(scipy.linalg.eigvalsh(blk.evaluate(start)))) >= 0:
            raise SdpError(
                f"initial point violates the hard block {blk.name or '<unnamed>'}; "
                "supply an initial_hint that satisfies it strictly"
            )
    rep = verify(problem, start)
    z0 = np.append(start, max(rep.max_residual, 0.0) + 1.0)
    if bar.factorize(z0) is None:
        # nudge the slack up until strictly inside
        for bump in (2.0, 8.0, 64.0, 1024.0):
            z0[s_idx] += bump
            if bar.factorize(z0) is not None:
                break
        else:
            raise SdpError("could not initialize the feasibility phase")

    exit_level = -abs(opts.phase1_exit)

    def early(zv: np.ndarray) -> bool:
        return zv[s_idx] <= exit_level

    def gap_target(zv: np.ndarray) -> float:
        return opts.phase1_gap

    z, t, iters, ok, msg = _path_follow(bar, z0, aug.c_obj, opts, gap_target, early_exit=early)
    t_star = float(z[s_idx])
    gap = bar.m_total / t
    if msg == "early-exit":
        return FeasibilityResult(t_star=t_star, t_lower=-np.inf, z=z[:-1], newton_iterations=iters, converged=True)
    if not ok:
        return FeasibilityResult(t_star=t_star, t_lower=t_star - gap, z=z[:-1], newton_iterations=iters, converged=False)
    return FeasibilityResult(t_star=t_star, t_lower=t_star - gap, z=z[:-1], newton_iterations=iters, converged=True)


def solve(problem: SdpProblem, opts: SolverOptions = SolverOptions()) -> SdpSolution:
    """Two-phase solve: feasibility first, then path-following on the
    objective.  ``Optimal`` guarantees the returned point satisfies every
    constraint within ``feas_tol`` and the objective is within ``gap_tol``
    (relative) of the optimum; ``Infeasible`` is certified by the phase-I
    optimum exceeding ``infeas_margin``."""
    try:
        feas = feasibility_phase(problem, opts)
    except SdpError as err:
        return SdpSolution(TROUBLE, None, None, None, None, 0, message=str(err))
    iters = feas.newton_iterations
    if feas.t_lower > opts.infeas_margin:
        return SdpSolution(
            INFEASIBLE,
            None,
            None,
            None,
            None,
            iters,
            phase1_slack=feas.t_star,
            message=f"phase-I slack minimum {feas.t_star:.3e} exceeds the margin",
        )
    if not feas.converged and feas.t_star > 0:
        return SdpSolution(
            BUDGET if iters >= opts.max_newton else TROUBLE,
            None,
            None,
            None,
            None,
            iters,
            phase1_slack=feas.t_star,
            message="feasibility phase did not converge",
        )

    pure_feasibility = not np.any(problem.c_obj)
    if pure_feasibility or feas.t_star > -1e-9:
        # nothing to optimize, or the interior is too thin to walk: report
        # the least-violating point
        z = feas.z
        rep = verify(problem, z)
        residual = rep.max_residual
        status = OPTIMAL if residual <= opts.feas_tol else TROUBLE
        msg = "" if status == OPTIMAL else (
            f"no strict interior within tolerance (best violation {residual:.3e})"
        )
        return SdpSolution(
            status,
            z,
            float(problem.c_obj @ z) + problem.obj_const,
            residual,
            0.0 if pure_feasibility else None,
            iters,
            phase1_slack=feas.t_star,
            message=msg,
        )

    bar = _Barrier(problem, opts)
    state = bar.factorize(feas.z)
    if state is None:
        return SdpSolution(
            TROUBLE, feas.z, None, None, None, iters,
            phase1_slack=feas.t_star, message="phase-I point is not strictly feasible",
        )

    def gap_target(zv: np.ndarray) -> float:
        return opts.gap_tol * (1.0 + abs(float(problem.c_obj @ zv)))

    z, t, used, ok, msg = _path_follow(bar, feas.z, problem.c_obj, opts, gap_target)
    iters += used
    rep = verify(problem, z)
    objective = float(problem.c_obj @ z) + problem.obj_const
    gap = bar.m_total / t
    if not ok:
        status = BUDGET if "budget" in msg else TROUBLE
        return SdpSolution(
            status, z, objective, rep.max_residual, gap, iters,
            phase1_slack=feas.t_star, message=msg,
        )
    return SdpSolution(
        OPTIMAL, z, objective, rep.max_residual, gap, iters, phase1_slack=feas.t_star
    )


def problem_to_dict(problem: SdpProblem) -> dict:
    """JSON-friendly dump for cross-checking against external solvers."""
    return {
        "n_vars": problem.n_vars,
        "var_names": problem.var_names,
        "objective": problem.c_obj.tolist(),
        "objective_const": problem.obj_const,
        "blocks": [
            {
                "name": blk.name,
                "dim": blk.dim,
                "hard": blk.hard,
                "m0": blk.m0.flatten().tolist(),
                "coeffs": {str(k): mat.flatten().tolist() for k, mat in blk.coeffs.items()},
            }
            for blk in problem.blocks
        ],
        "lin_f": problem.lin_f.tolist(),
        "lin_g": problem.lin_g.tolist(),
        "lb": [None if not math.isfinite(v) else v for v in problem.lb],
        "ub": [None if not math.isfinite(v) else v for v in problem.ub],
    }


# ---------------------------------------------------------------------------
# Builder
# ---------------------------------------------------------------------------


class ProblemBuilder:
    """Incremental construction helper used by the assemblers and tests."""

    def __init__(self):
        self._names: list[str] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._obj: dict[int, float] = {}
        self._blocks: list[LmiBlock] = []
        self._rows: list[tuple[dict[int, float], float]] = []
        self._hint: dict[int, float] = {}
        self.obj_const = 0.0

    def add_var(self, name: str, lb: float = -np.inf, ub: float = np.inf) -> int:
        self._names.append(name)
        self._lb.append(lb)
        self._ub.append(ub)
        return len(self._names) - 1

    def add_vars(self, prefix: str, count: int, lb: float = -np.inf, ub: float = np.inf) -> list[int]:
        return [self.add_var(f"{prefix}{i}", lb, ub) for i in range(count)]

    def set_objective(self, terms: dict[int, float], const: float = 0.0):
        self._obj = dict(terms)
        self.obj_const = const

    def add_block(self, m0: np.ndarray, coeffs: dict[int, np.ndarray], name: str = "", hard: bool = False):
        self._blocks.append(LmiBlock(np.asarray(m0, dtype=float), coeffs, name, hard))

    def add_row(self, coeffs: dict[int, float], rhs: float):
        self._rows.append((dict(coeffs), float(rhs)))

    def hint(self, var: int, value: float):
        self._hint[var] = float(value)

    @property
    def n_vars(self) -> int:
        return len(self._names)

    def build(self) -> SdpProblem:
        n = self.n_vars
        c = np.zeros(n)
        for k, v in self._obj.items():
            c[k] = v
        f = np.zeros((len(self._rows), n))
        g = np.zeros(len(self._rows))
        for r, (coeffs, rhs) in enumerate(self._rows):
            for k, v in coeffs.items():
                f[r, k] = v
            g[r] = rhs
        hint = None
        if self._hint:
            hint = np.zeros(n)
            for k, v in self._hint.items():
                hint[k] = v
        return SdpProblem(
            n_vars=n,
            c_obj=c,
            blocks=list(self._blocks),
            lin_f=f,
            lin_g=g,
            lb=np.array(self._lb),
            ub=np.array(self._ub),
            var_names=list(self._names),
            obj_const=self.obj_const,
            initial_hint=hint,
        )
