"""Sensor placement as a mixed-integer semidefinite program.

The bilinear coupling between the gain slack Y and the binary activations
is replaced by a new variable Q tied to Y and gamma through four linear
inequalities per matrix entry; at binary activations those inequalities
force Q to equal Y with the off sensors' columns zeroed, so the
reformulated problem is exactly equivalent.  Branch-and-bound over the
activations then solves the placement: each node is a dense SDP with the
free activations relaxed into [0, 1].

Margin semantics: the placement LMI is scale-homogeneous and can be
feasible only marginally (a ray along which the block's top eigenvalue
tends to zero, with kappa collapsing).  Feasibility is therefore judged by
the phase-I slack optimum against ``infeas_margin``; node relaxations are
solved with the same margin as an explicit slack so the relaxed problems
keep an interior, which leaves every node bound a valid lower bound.
Marginal incumbents are flagged rather than rejected.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import sdp
from .classify import NonlinearityParams
from .model import NdsModel, column_sensor_map, expand_gamma
from .sdp import LmiBlock, ProblemBuilder, SdpProblem, SolverOptions

__all__ = [
    "MisdpError",
    "McCormickSystem",
    "PlacementProblem",
    "PlacementResult",
    "build_mccormick",
    "assemble_p3",
    "assemble_p4",
    "assemble_bounded_jacobian",
    "branch_and_bound",
    "branching_rule",
    "enumerate_placements",
    "sym_entries",
]

DEFAULT_Y_BOUND = 100.0
P_FLOOR_SCALE = 1e-6       # strict positivity shift: P >= mu*I, mu = scale*||A||_F
KAPPA_MARGINAL = 1e-8
INTEGRALITY_TOL = 1e-6


class MisdpError(Exception):
    pass


def sym_entries(n: int) -> list[tuple[int, int]]:
    return [(a, b) for a in range(n) for b in range(a, n)]


def _sym_basis(n: int, a: int, b: int) -> np.ndarray:
    s = np.zeros((n, n))
    s[a, b] = 1.0
    s[b, a] = 1.0
    return s


# ---------------------------------------------------------------------------
# McCormick system
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class McCormickRow:
    """One inequality  cq*Q_ij + cy*Y_ij + cg*gamma_owner <= rhs."""

    i: int
    j: int
    owner: int
    cq: float
    cy: float
    cg: float
    rhs: float


@dataclass
class McCormickSystem:
    """The linear-inequality system tying Q to Y*Gamma(gamma).

    Stored both entrywise (``rows``) and assembled (``phi``, ``nu`` acting
    on the stacked vector [vec Q; vec Y; gamma; vec Y; vec Y; kappa], vec
    taken column-major).  Both describe the same polyhedron; at binary
    gamma the rows are feasible exactly when Q equals Y with the off
    columns zeroed.
    """

    y_lo: np.ndarray
    y_hi: np.ndarray
    owners: list[int]
    n_sensors: int
    rows: list[McCormickRow]
    phi: np.ndarray
    nu: np.ndarray

    @property
    def n_x(self) -> int:
        return self.y_lo.shape[0]

    @property
    def n_y(self) -> int:
        return self.y_lo.shape[1]

    def xi(self, q: np.ndarray, y: np.ndarray, gamma: Sequence[float], kappa: float) -> np.ndarray:
        vec_q = q.flatten(order="F")
        vec_y = y.flatten(order="F")
        return np.concatenate([vec_q, vec_y, np.asarray(gamma, dtype=float), vec_y, vec_y, [kappa]])

    def satisfied_assembled(self, q, y, gamma, kappa) -> np.ndarray:
        return self.phi @ self.xi(q, y, gamma, kappa) <= self.nu

    def satisfied_rowwise(self, q, y, gamma, kappa) -> np.ndarray:
        out = []
        for r in self.rows:
            out.append(r.cq * q[r.i, r.j] + r.cy * y[r.i, r.j] + r.cg * gamma[r.owner] <= r.rhs)
        out.extend(y.flatten(order="F") <= self.y_hi.flatten(order="F"))
        out.extend(-y.flatten(order="F") <= -self.y_lo.flatten(order="F"))
        out.append(-kappa <= 0.0)
        return np.array(out)


def build_mccormick(
    y_lo: np.ndarray, y_hi: np.ndarray, partition_y: Sequence[int]
) -> McCormickSystem:
    """Four rows per (i, j) entry plus the Y box and kappa >= 0.

    Row pattern per entry, owner g = gamma of column j's sensor:
        Q - Y - y_lo*g <= -y_lo        (from (Y - y_lo)(1 - g) >= 0)
        -Q + Y + y_hi*g <= y_hi        (from (y_hi - Y)(1 - g) >= 0)
        Q - y_hi*g <= 0                (from (y_hi - Y) g >= 0)
        -Q + y_lo*g <= 0               (from (Y - y_lo) g >= 0)
    """
    y_lo = np.asarray(y_lo, dtype=float)
    y_hi = np.asarray(y_hi, dtype=float)
    if y_lo.shape != y_hi.shape:
        raise MisdpError("Y bound shapes disagree")
    if np.any(~np.isfinite(y_lo)) or np.any(~np.isfinite(y_hi)):
        raise MisdpError("Y bounds must be finite for the reformulation")
    if np.any(y_lo > y_hi):
        raise MisdpError("Y lower bound exceeds upper bound")
    n_x, n_y = y_lo.shape
    owners = column_sensor_map(partition_y)
    if len(owners) != n_y:
        raise MisdpError("output partition does not match the Y column count")
    n_sensors = len(partition_y)

    rows: list[McCormickRow] = []
    nxy = n_x * n_y
    sigma1 = np.array([1.0, -1.0, 1.0, -1.0])
    sigma2 = np.array([-1.0, 1.0, 0.0, 0.0])
    psi = np.zeros(4 * nxy)
    big = np.zeros((4 * nxy, 2 * nxy + n_sensors))
    for ell in range(nxy):
        i, j = ell % n_x, ell // n_x  # column-major stacking
        lo, hi = y_lo[i, j], y_hi[i, j]
        omega = np.array([-lo, hi, -hi, lo])
        rhs = np.array([-lo, hi, 0.0, 0.0])
        psi[4 * ell : 4 * ell + 4] = rhs
        big[4 * ell : 4 * ell + 4, ell] = sigma1
        big[4 * ell : 4 * ell + 4, nxy + ell] = sigma2
        big[4 * ell : 4 * ell + 4, 2 * nxy + owners[j]] = omega
        for r in range(4):
            rows.append(
                McCormickRow(
                    i=i, j=j, owner=owners[j],
                    cq=sigma1[r], cy=sigma2[r], cg=omega[r], rhs=rhs[r],
                )
            )

    phi = np.zeros((4 * nxy + 2 * nxy + 1, 2 * nxy + n_sensors + 2 * nxy + 1))
    phi[: 4 * nxy, : 2 * nxy + n_sensors] = big
    col = 2 * nxy + n_sensors
    phi[4 * nxy : 5 * nxy, col : col + nxy] = np.eye(nxy)
    phi[5 * nxy : 6 * nxy, col + nxy : col + 2 * nxy] = -np.eye(nxy)
    phi[6 * nxy, col + 2 * nxy] = -1.0
    nu = np.concatenate([psi, y_hi.flatten(order="F"), -y_lo.flatten(order="F"), [0.0]])
    return McCormickSystem(
        y_lo=y_lo, y_hi=y_hi, owners=owners, n_sensors=n_sensors,
        rows=rows, phi=phi, nu=nu,
    )


def q_projection_bounds(lo: float, hi: float, g: float) -> tuple[float, float]:
    """Exact projection of one entry's McCormick polytope onto (Q, gamma):
    the Y variable can be eliminated because each entry's rows involve only
    its own Y."""
    q_lo = max(lo * g, lo - hi + hi * g)
    q_hi = min(hi * g, hi - lo + lo * g)
    return q_lo, q_hi


# ---------------------------------------------------------------------------
# Placement problems
# ---------------------------------------------------------------------------


@dataclass
class PlacementProblem:
    """Everything the assembler and the search need to place sensors."""

    model: NdsModel
    params: NonlinearityParams
    variant: str = "lipschitz"  # or "bounded-jacobian"
    y_lo: np.ndarray | None = None
    y_hi: np.ndarray | None = None
    w: np.ndarray | None = None  # bounded-Jacobian auxiliary map, (n_x, n_x^2)
    options: SolverOptions = field(default_factory=lambda: SolverOptions(max_newton=400))
    node_limit: int = 10_000
    heuristic_cap: int = 8

    def __post_init__(self):
        n_x, n_y = self.model.n_x, self.model.n_y
        if self.y_lo is None:
            self.y_lo = -DEFAULT_Y_BOUND * np.ones((n_x, n_y))
        if self.y_hi is None:
            self.y_hi = DEFAULT_Y_BOUND * np.ones((n_x, n_y))
        self.y_lo = np.asarray(self.y_lo, dtype=float)
        self.y_hi = np.asarray(self.y_hi, dtype=float)
        if self.variant == "lipschitz":
            if self.params.beta is None:
                raise MisdpError("the Lipschitz variant needs a beta constant")
        elif self.variant == "bounded-jacobian":
            if self.params.jac_lo is None or self.params.jac_hi is None:
                raise MisdpError("the bounded-Jacobian variant needs Jacobian bounds")
            if self.w is None:
                raise MisdpError(
                    "the bounded-Jacobian variant needs the auxiliary map W "
                    f"of shape ({n_x}, {n_x * n_x})"
                )
            self.w = np.asarray(self.w, dtype=float)
            if self.w.shape != (n_x, n_x * n_x):
                raise MisdpError(f"W must have shape ({n_x}, {n_x * n_x}), got {self.w.shape}")
        else:
            raise MisdpError(f"unknown variant {self.variant!r}")

    @property
    def mu(self) -> float:
        return P_FLOOR_SCALE * float(np.linalg.norm(self.model.a, "fro"))


@dataclass
class AssembledPlacement:
    """An SdpProblem plus the variable layout needed to read the solution."""

    problem: SdpProblem
    p_vars: dict[tuple[int, int], int]
    q_vars: dict[tuple[int, int], int]
    y_vars: dict[tuple[int, int], int]
    gamma_vars: dict[int, int]
    gamma_fixed: dict[int, int]
    kappa_var: int | None
    lam_vars: dict[tuple[int, int], int]
    n_x: int
    n_y: int
    n_sensors: int
    mu: float

    def extract_p(self, z: np.ndarray) -> np.ndarray:
        p = np.zeros((self.n_x, self.n_x))
        for (a, b), k in self.p_vars.items():
            p[a, b] = p[b, a] = z[k]
        return p

    def extract_q(self, z: np.ndarray) -> np.ndarray:
        q = np.zeros((self.n_x, self.n_y))
        for (i, j), k in self.q_vars.items():
            q[i, j] = z[k]
        return q

    def extract_y(self, z: np.ndarray) -> np.ndarray:
        if self.y_vars:
            y = np.zeros((self.n_x, self.n_y))
            for (i, j), k in self.y_vars.items():
                y[i, j] = z[k]
            return y
        # Y was eliminated: the solved Q is itself an admissible Y choice on
        # selected columns, zero is admissible elsewhere
        return self.extract_q(z)

    def extract_gamma(self, z: np.ndarray | None) -> np.ndarray:
        g = np.zeros(self.n_sensors)
        for s, v in self.gamma_fixed.items():
            g[s] = v
        if z is not None:
            for s, k in self.gamma_vars.items():
                g[s] = z[k]
        return g

    def extract_kappa(self, z: np.ndarray) -> float | None:
        return float(z[self.kappa_var]) if self.kappa_var is not None else None

    def extract_lam(self, z: np.ndarray) -> np.ndarray | None:
        if not self.lam_vars:
            return None
        lam = np.zeros((self.n_x, self.n_x))
        for (i, j), k in self.lam_vars.items():
            lam[i, j] = z[k]
        return lam


def _p_bound(model: NdsModel) -> float:
    return 1e6 * max(1.0, float(np.linalg.norm(model.a, "fro")))


def _add_p_vars(pb: ProblemBuilder, model: NdsModel) -> dict[tuple[int, int], int]:
    bound = _p_bound(model)
    return {(a, b): pb.add_var(f"p_{a}_{b}", -bound, bound) for (a, b) in sym_entries(model.n_x)}


def _p_floor_block(pb: ProblemBuilder, p_vars, n_x: int, mu: float):
    # strictness floor for P > 0; hard so the feasibility slack cannot
    # trade it against the stability block along the homogeneous ray
    coeffs = {k: -_sym_basis(n_x, a, b) for (a, b), k in p_vars.items()}
    pb.add_block(mu * np.eye(n_x), coeffs, name="p_floor", hard=True)
    for (a, b), k in p_vars.items():
        if a == b:
            pb.hint(k, max(1.0, 2.0 * mu))


def _logistic_rows(pb: ProblemBuilder, placement: PlacementProblem, gamma_vars, gamma_fixed):
    sensors = placement.model.sensors
    fixed_on = sum(v for v in gamma_fixed.values())
    free = list(gamma_vars.values())
    if not free:
        return
    lo_needed = sensors.k_min - fixed_on
    hi_allowed = sensors.k_max - fixed_on
    if lo_needed > 0:
        pb.add_row({k: -1.0 for k in free}, -float(lo_needed))
    if hi_allowed < len(free):
        pb.add_row({k: 1.0 for k in free}, float(hi_allowed))


def _gamma_setup(pb: ProblemBuilder, placement: PlacementProblem, gamma_fixed: dict[int, int]):
    sensors = placement.model.sensors
    fixed = dict(gamma_fixed)
    for s in sensors.force_on:
        if fixed.get(s, 1) != 1:
            raise MisdpError(f"sensor {s} is forced on but fixed off")
        fixed[s] = 1
    for s in sensors.force_off:
        if fixed.get(s, 0) != 0:
            raise MisdpError(f"sensor {s} is forced off but fixed on")
        fixed[s] = 0
    gamma_vars = {
        s: pb.add_var(f"gamma_{s}", 0.0, 1.0)
        for s in range(sensors.n_sensors)
        if s not in fixed
    }
    return gamma_vars, fixed


def _objective_terms(placement: PlacementProblem, gamma_vars, gamma_fixed):
    c = placement.model.sensors.weights
    terms = {k: float(c[s]) for s, k in gamma_vars.items()}
    const = float(sum(c[s] * v for s, v in gamma_fixed.items()))
    return terms, const


def _q_columns(placement: PlacementProblem, pb, gamma_vars, gamma_fixed, eliminate_y: bool):
    """Create Q (and optionally Y) variables plus the rows tying them to
    gamma.  Columns owned by a fixed-off sensor are dropped entirely."""
    model = placement.model
    owners = column_sensor_map(model.partition_y)
    q_vars: dict[tuple[int, int], int] = {}
    y_vars: dict[tuple[int, int], int] = {}
    y_lo, y_hi = placement.y_lo, placement.y_hi
    qb = float(np.max(np.abs(np.stack([y_lo, y_hi]))))
    for j in range(model.n_y):
        owner = owners[j]
        fixed_val = gamma_fixed.get(owner)
        for i in range(model.n_x):
            lo, hi = y_lo[i, j], y_hi[i, j]
            if fixed_val == 0 and eliminate_y:
                continue  # Q forced to zero; no variable at all
            if fixed_val == 1 and eliminate_y:
                q_vars[(i, j)] = pb.add_var(f"q_{i}_{j}", lo, hi)
                continue
            if eliminate_y:
                k_q = pb.add_var(f"q_{i}_{j}", -qb, qb)
                q_vars[(i, j)] = k_q
                k_g = gamma_vars[owner]
                # exact projection of the entry's McCormick rows onto (Q, gamma)
                pb.add_row({k_q: 1.0, k_g: -hi}, 0.0)
                pb.add_row({k_q: -1.0, k_g: lo}, 0.0)
                pb.add_row({k_q: 1.0, k_g: -lo}, hi - lo)
                pb.add_row({k_q: -1.0, k_g: hi}, hi - lo)
                continue
            # full form: keep Y and the four standard rows
            k_q = pb.add_var(f"q_{i}_{j}", -qb, qb)
            k_y = pb.add_var(f"y_{i}_{j}", lo, hi)
            q_vars[(i, j)] = k_q
            y_vars[(i, j)] = k_y
            if fixed_val is None:
                k_g = gamma_vars[owner]
                pb.add_row({k_q: 1.0, k_y: -1.0, k_g: -lo}, -lo)
                pb.add_row({k_q: -1.0, k_y: 1.0, k_g: hi}, hi)
                pb.add_row({k_q: 1.0, k_g: -hi}, 0.0)
                pb.add_row({k_q: -1.0, k_g: lo}, 0.0)
            else:
                g = float(fixed_val)
                pb.add_row({k_q: 1.0, k_y: -1.0}, -lo + lo * g)
                pb.add_row({k_q: -1.0, k_y: 1.0}, hi - hi * g)
                pb.add_row({k_q: 1.0}, hi * g)
                pb.add_row({k_q: -1.0}, -lo * g)
    return q_vars, y_vars


def _lipschitz_lmi(placement: PlacementProblem, pb, p_vars, q_vars, kappa_var):
    model = placement.model
    n = model.n_x
    c_mat = model.c
    beta = float(placement.params.beta)
    dim = 2 * n
    coeffs: dict[int, np.ndarray] = {}
    for (a, b), k in p_vars.items():
        s = _sym_basis(n, a, b)
        m = np.zeros((dim, dim))
        m[:n, :n] = model.a.T @ s + s @ model.a
        m[:n, n:] = s
        m[n:, :n] = s
        coeffs[k] = m
    for (i, j), k in q_vars.items():
        e = np.zeros((n, model.n_y))
        e[i, j] = 1.0
        m = np.zeros((dim, dim))
        m[:n, :n] = -(e @ c_mat + c_mat.T @ e.T)
        coeffs[k] = m
    m_kappa = np.zeros((dim, dim))
    m_kappa[:n, :n] = beta * beta * np.eye(n)
    m_kappa[n:, n:] = -np.eye(n)
    coeffs[kappa_var] = m_kappa
    pb.add_block(np.zeros((dim, dim)), coeffs, name="stability")


def assemble_p4(
    placement: PlacementProblem,
    gamma_fixed: dict[int, int] | None = None,
    eliminate_y: bool = True,
) -> AssembledPlacement:
    """The convex placement program for the Lipschitz variant.

    Free sensors appear as relaxed [0, 1] variables; fixed ones are folded
    into the constants.  With ``eliminate_y`` the per-entry Y variables are
    projected out of the McCormick rows (an exact projection, used by the
    search nodes); without it the full Q/Y/gamma row system is kept, which
    is the form the equivalence tests exercise.
    """
    if placement.variant != "lipschitz":
        raise MisdpError("assemble_p4 serves the Lipschitz variant")
    model = placement.model
    pb = ProblemBuilder()
    p_vars = _add_p_vars(pb, model)
    kappa_var = pb.add_var("kappa", 0.0, 1e9)
    gamma_vars, fixed = _gamma_setup(pb, placement, gamma_fixed or {})
    q_vars, y_vars = _q_columns(placement, pb, gamma_vars, fixed, eliminate_y)
    _lipschitz_lmi(placement, pb, p_vars, q_vars, kappa_var)
    _p_floor_block(pb, p_vars, model.n_x, placement.mu)
    _logistic_rows(pb, placement, gamma_vars, fixed)
    terms, const = _objective_terms(placement, gamma_vars, fixed)
    pb.set_objective(terms, const)
    return AssembledPlacement(
        problem=pb.build(),
        p_vars=p_vars,
        q_vars=q_vars,
        y_vars=y_vars,
        gamma_vars=gamma_vars,
        gamma_fixed=fixed,
        kappa_var=kappa_var,
        lam_vars={},
        n_x=model.n_x,
        n_y=model.n_y,
        n_sensors=model.sensors.n_sensors,
        mu=placement.mu,
    )


def assemble_p3(placement: PlacementProblem, gamma: Sequence[int]) -> AssembledPlacement:
    """The pre-reformulation program at one binary activation vector: Q is
    substituted by Y with the off columns zeroed, so only P, Y and kappa
    remain.  Used as the reference side of the equivalence tests."""
    if placement.variant != "lipschitz":
        raise MisdpError("assemble_p3 serves the Lipschitz variant")
    model = placement.model
    g = np.asarray(gamma, dtype=int)
    if len(g) != model.sensors.n_sensors or np.any((g != 0) & (g != 1)):
        raise MisdpError("gamma must be a binary vector over the sensors")
    owners = column_sensor_map(model.partition_y)
    pb = ProblemBuilder()
    p_vars = _add_p_vars(pb, model)
    kappa_var = pb.add_var("kappa", 0.0, 1e9)
    y_vars = {
        (i, j): pb.add_var(f"y_{i}_{j}", placement.y_lo[i, j], placement.y_hi[i, j])
        for j in range(model.n_y)
        for i in range(model.n_x)
    }
    # Q := Y Gamma(gamma): only on-columns reach the matrix inequality
    q_like = {(i, j): k for (i, j), k in y_vars.items() if g[owners[j]] == 1}
    _lipschitz_lmi(placement, pb, p_vars, q_like, kappa_var)
    _p_floor_block(pb, p_vars, model.n_x, placement.mu)
    return AssembledPlacement(
        problem=pb.build(),
        p_vars=p_vars,
        q_vars=q_like,
        y_vars=y_vars,
        gamma_vars={},
        gamma_fixed={s: int(v) for s, v in enumerate(g)},
        kappa_var=kappa_var,
        lam_vars={},
        n_x=model.n_x,
        n_y=model.n_y,
        n_sensors=model.sensors.n_sensors,
        mu=placement.mu,
    )


def jacobian_centers(jac_lo: np.ndarray, jac_hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The center/half-spread reparameterization of entrywise Jacobian
    bounds: c_low = (lo + hi)/2, c_high = (lo - hi)/2."""
    return 0.5 * (jac_lo + jac_hi), 0.5 * (jac_lo - jac_hi)


def bounded_jacobian_thetas(
    lam: np.ndarray, jac_lo: np.ndarray, jac_hi: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three multiplier-dependent blocks of the bounded-Jacobian design
    for a concrete nonnegative multiplier matrix."""
    n = lam.shape[0]
    c_low, c_high = jacobian_centers(jac_lo, jac_hi)
    theta1 = np.diag([float(np.sum(lam[:, j] * (c_high[:, j] ** 2 - c_low[:, j] ** 2))) for j in range(n)])
    theta2 = np.zeros((n * n, n))
    theta3 = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            r = i * n + j
            theta2[r, j] = lam[i, j] * c_low[i, j]
            theta3[r, r] = lam[i, j]
    return theta1, theta2, theta3


def assemble_bounded_jacobian(
    placement: PlacementProblem,
    gamma_fixed: dict[int, int] | None = None,
    eliminate_y: bool = True,
) -> AssembledPlacement:
    """Placement for entrywise-bounded Jacobians.

    The gain term follows the same Q substitution and McCormick rows as the
    Lipschitz variant; the multiplier matrix enters through the three theta
    blocks, and the stacked auxiliary direction matrix W is user input (its
    provenance is recorded in the placement report).
    """
    if placement.variant != "bounded-jacobian":
        raise MisdpError("assemble_bounded_jacobian serves the bounded-jacobian variant")
    model = placement.model
    n = model.n_x
    jac_lo, jac_hi = placement.params.jac_lo, placement.params.jac_hi
    c_low, c_high = jacobian_centers(jac_lo, jac_hi)
    w = placement.w
    pb = ProblemBuilder()
    p_vars = _add_p_vars(pb, model)
    gamma_vars, fixed = _gamma_setup(pb, placement, gamma_fixed or {})
    q_vars, y_vars = _q_columns(placement, pb, gamma_vars, fixed, eliminate_y)
    lam_vars = {
        (i, j): pb.add_var(f"lam_{i}_{j}", 0.0, 1e9) for i in range(n) for j in range(n)
    }
    dim = n + n * n
    coeffs: dict[int, np.ndarray] = {}
    c_mat = model.c
    for (a, b), k in p_vars.items():
        s = _sym_basis(n, a, b)
        m = np.zeros((dim, dim))
        m[:n, :n] = model.a.T @ s + s @ model.a
        bottom_left = w.T @ s
        m[n:, :n] = bottom_left
        m[:n, n:] = bottom_left.T
        coeffs[k] = m
    for (i, j), k in q_vars.items():
        e = np.zeros((n, model.n_y))
        e[i, j] = 1.0
        m = np.zeros((dim, dim))
        m[:n, :n] = -(e @ c_mat + c_mat.T @ e.T)
        coeffs[k] = m
    for (i, j), k in lam_vars.items():
        r = i * n + j
        m = np.zeros((dim, dim))
        m[j, j] = c_high[i, j] ** 2 - c_low[i, j] ** 2
        m[n + r, j] += c_low[i, j]
        m[j, n + r] += c_low[i, j]
        m[n + r, n + r] = 1.0
        coeffs[k] = m
    pb.add_block(np.zeros((dim, dim)), coeffs, name="stability")
    _p_floor_block(pb, p_vars, n, placement.mu)
    _logistic_rows(pb, placement, gamma_vars, fixed)
    terms, const = _objective_terms(placement, gamma_vars, fixed)
    pb.set_objective(terms, const)
    return AssembledPlacement(
        problem=pb.build(),
        p_vars=p_vars,
        q_vars=q_vars,
        y_vars=y_vars,
        gamma_vars=gamma_vars,
        gamma_fixed=fixed,
        kappa_var=None,
        lam_vars=lam_vars,
        n_x=n,
        n_y=model.n_y,
        n_sensors=model.sensors.n_sensors,
        mu=placement.mu,
    )


def _assemble(placement: PlacementProblem, gamma_fixed=None, eliminate_y=True) -> AssembledPlacement:
    if placement.variant == "lipschitz":
        return assemble_p4(placement, gamma_fixed, eliminate_y)
    return assemble_bounded_jacobian(placement, gamma_fixed, eliminate_y)


# ---------------------------------------------------------------------------
# Branch and bound
# ---------------------------------------------------------------------------


def branching_rule(gamma_relaxed: dict[int, float]) -> int:
    """Most fractional free activation, ties to the lowest index."""
    if not gamma_relaxed:
        raise MisdpError("no free activations to branch on")
    def score(item):
        s, v = item
        return (-min(v, 1.0 - v), s)
    return min(gamma_relaxed.items(), key=score)[0]


@dataclass
class PlacementResult:
    gamma: np.ndarray
    objective: float
    p: np.ndarray
    y: np.ndarray
    q: np.ndarray
    kappa: float | None
    lam: np.ndarray | None
    gain: np.ndarray
    residual: float
    marginal: bool
    kappa_flag: bool
    p_condition: float
    stats: dict

    def selected(self) -> list[int]:
        return [int(s) for s in np.flatnonzero(self.gamma > 0.5)]


@dataclass
class _Node:
    fixed: dict[int, int]
    bound: float
    depth: int
    node_id: int
    parent: int


def _is_feasible_gamma(placement: PlacementProblem, gamma: tuple[int, ...], cache: dict, stats: dict):
    """Feasibility-within-margin oracle for one binary activation vector."""
    if gamma in cache:
        return cache[gamma]
    assembled = _assemble(placement, {s: g for s, g in enumerate(gamma)}, eliminate_y=True)
    stats["sdp_solves"] += 1
    feas = sdp.feasibility_phase(assembled.problem, placement.options)
    ok = feas.t_star <= placement.options.infeas_margin
    cache[gamma] = (ok, feas, assembled)
    return cache[gamma]


def _weights_integral(weights: np.ndarray) -> bool:
    return bool(np.all(np.abs(weights - np.round(weights)) < 1e-12))


def _lift_bound(bound: float, integral: bool) -> float:
    return math.ceil(bound - 1e-6) if integral else bound


def branch_and_bound(placement: PlacementProblem) -> PlacementResult:
    """Optimal placement by best-bound search over the activations.

    Every leaf is either pruned by its relaxation bound against the
    incumbent, pruned infeasible, or solved; incumbent ties break to the
    lexicographically smallest activation vector.  The final activation is
    re-solved to extract the certificate matrices and the observer gain.
    """
    sensors = placement.model.sensors
    n = sensors.n_sensors
    t0 = time.monotonic()
    stats = {"nodes": 0, "sdp_solves": 0, "node_log": []}
    cache: dict = {}
    integral_w = _weights_integral(sensors.weights)

    best_gamma: tuple[int, ...] | None = None
    best_obj = math.inf

    def try_incumbent(gamma: tuple[int, ...]):
        nonlocal best_gamma, best_obj
        if not sensors.admits(gamma):
            return False
        ok, _, _ = _is_feasible_gamma(placement, gamma, cache, stats)
        if not ok:
            return False
        obj = float(sensors.weights @ np.array(gamma))
        if obj < best_obj - 1e-9 or (
            abs(obj - best_obj) <= 1e-9 and (best_gamma is None or gamma < best_gamma)
        ):
            best_gamma, best_obj = gamma, obj
        return True

    def weight_floor(fixed: dict[int, int]) -> float:
        return float(sum(sensors.weights[s] for s, v in fixed.items() if v == 1))

    def cardinality_ok(fixed: dict[int, int]) -> bool:
        ones = sum(v for v in fixed.values())
        free = n - len(fixed)
        return ones <= sensors.k_max and ones + free >= sensors.k_min

    import heapq

    counter = 0
    node_limit_hit = False
    heap: list[tuple[float, int, int, _Node]] = []
    root = _Node(fixed={}, bound=0.0, depth=0, node_id=0, parent=-1)
    heapq.heappush(heap, (root.bound, -root.depth, counter, root))
    next_id = 1

    while heap:
        if stats["nodes"] >= placement.node_limit:
            node_limit_hit = True
            break
        _, _, _, node = heapq.heappop(heap)
        if node.bound >= best_obj - 1e-9:
            stats["node_log"].append((node.node_id, node.parent, node.bound, "pruned-bound"))
            continue
        stats["nodes"] += 1
        if not cardinality_ok(node.fixed):
            stats["node_log"].append((node.node_id, node.parent, node.bound, "pruned-cardinality"))
            continue
        if weight_floor(node.fixed) >= best_obj - 1e-9:
            stats["node_log"].append((node.node_id, node.parent, node.bound, "pruned-weight"))
            continue

        free = [s for s in range(n) if s not in node.fixed
                and s not in sensors.force_on and s not in sensors.force_off]
        if not free:
            gamma = list(node.fixed)
            full = dict(node.fixed)
            for s in sensors.force_on:
                full[s] = 1
            for s in sensors.force_off:
                full[s] = 0
            gamma = tuple(full.get(s, 0) for s in range(n))
            found = try_incumbent(gamma)
            stats["node_log"].append(
                (node.node_id, node.parent, node.bound, "leaf-feasible" if found else "leaf-infeasible")
            )
            continue

        assembled = _assemble(placement, node.fixed, eliminate_y=True)
        relaxed_problem = sdp.slacked(assembled.problem, placement.options.infeas_margin)
        stats["sdp_solves"] += 1
        out = sdp.solve(relaxed_problem, placement.options)
        if out.status == sdp.TROUBLE:
            loose = SolverOptions(
                feas_tol=placement.options.feas_tol * 10,
                gap_tol=placement.options.gap_tol * 10,
                infeas_margin=placement.options.infeas_margin,
                max_newton=placement.options.max_newton * 2,
            )
            stats["sdp_solves"] += 1
            out = sdp.solve(relaxed_problem, loose)
            if out.status == sdp.TROUBLE:
                raise MisdpError(f"node relaxation failed twice: {out.message}")
        if out.status == sdp.INFEASIBLE:
            stats["node_log"].append((node.node_id, node.parent, node.bound, "pruned-infeasible"))
            continue
        if out.status == sdp.BUDGET and out.z is None:
            raise MisdpError("node relaxation exhausted its budget without a point")

        gap = out.gap_estimate if out.gap_estimate else 0.0
        bound = _lift_bound(out.objective - gap - 1e-9, integral_w)
        relaxed_gamma = {s: float(out.z[k]) for s, k in assembled.gamma_vars.items()}

        if node.node_id == 0:
            _root_heuristic(placement, relaxed_gamma, bound, try_incumbent, lambda: best_obj)

        if bound >= best_obj - 1e-9:
            stats["node_log"].append((node.node_id, node.parent, bound, "pruned-bound"))
            continue

        frac = {s: v for s, v in relaxed_gamma.items() if min(v, 1.0 - v) > INTEGRALITY_TOL}
        if not frac:
            gamma = assembled.extract_gamma(out.z)
            gamma = tuple(int(round(v)) for v in gamma)
            found = try_incumbent(gamma)
            stats["node_log"].append(
                (node.node_id, node.parent, bound, "integral-feasible" if found else "integral-rejected")
            )
            continue

        branch_var = branching_rule(frac)
        stats["node_log"].append((node.node_id, node.parent, bound, f"branch-gamma_{branch_var}"))
        for value in (0, 1):
            child_fixed = dict(node.fixed)
            child_fixed[branch_var] = value
            counter += 1
            child = _Node(
                fixed=child_fixed, bound=bound, depth=node.depth + 1,
                node_id=next_id, parent=node.node_id,
            )
            next_id += 1
            heapq.heappush(heap, (child.bound, -child.depth, counter, child))

    if best_gamma is None:
        if node_limit_hit:
            raise MisdpError("node limit reached before any feasible placement was found")
        raise MisdpError("infeasible: no activation in the logistic set admits an observer")

    return _extract(placement, best_gamma, best_obj, cache, stats, t0, node_limit_hit)


def _root_heuristic(placement, relaxed_gamma, bound, try_incumbent, current_best):
    """Cheap integral candidates after the root solve: for unit-cardinality
    targets sweep single-sensor vectors from the last index (the
    lexicographically smallest support), otherwise round the largest
    relaxed activations up."""
    sensors = placement.model.sensors
    n = sensors.n_sensors
    budget = placement.heuristic_cap
    base = {s: 1 for s in sensors.force_on}
    forced_w = sum(sensors.weights[s] for s in base)
    k_target = max(sensors.k_min, len(base), 1)
    if k_target - len(base) == 1 and not base:
        order = [s for s in range(n - 1, -1, -1) if s not in sensors.force_off]
        for s in order:
            if budget <= 0:
                return
            gamma = tuple(1 if i == s else 0 for i in range(n))
            if not sensors.admits(gamma):
                continue
            budget -= 1
            try_incumbent(gamma)
            if current_best() <= bound + 1e-9:
                return
        return
    ranked = sorted(
        (s for s in range(n) if s not in base and s not in sensors.force_off),
        key=lambda s: (-relaxed_gamma.get(s, 0.0), -s),
    )
    pick = dict(base)
    for s in ranked[: max(0, k_target - len(base))]:
        pick[s] = 1
    gamma = tuple(1 if pick.get(s) else 0 for s in range(n))
    if sensors.admits(gamma):
        try_incumbent(gamma)


def _minimal_gain_point(placement, assembled, feas, stats) -> np.ndarray:
    """Second extraction stage: among the points within the certificate
    tolerance, pick one with the smallest summed |Q|.

    On a marginal instance the raw violation minimizer is free to return an
    arbitrarily aggressive gain (P sits at its strictness floor, so any
    moderate Q means an enormous P^-1 Q); re-solving with a gain-magnitude
    objective keeps the observer implementable while the residual stays
    within the margin.
    """
    margin = placement.options.infeas_margin
    t_star = feas.t_star
    cert_slack = 0.0 if t_star <= 0 else 0.5 * (t_star + margin)
    base = sdp.slacked(assembled.problem, cert_slack)
    pb_n = base.n_vars
    q_keys = sorted(assembled.q_vars)
    if not q_keys:
        return feas.z
    extra = len(q_keys)
    qb = float(np.max(np.abs(np.stack([placement.y_lo, placement.y_hi]))))
    lin_f = np.zeros((base.lin_f.shape[0] + 2 * extra, pb_n + extra))
    lin_f[: base.lin_f.shape[0], :pb_n] = base.lin_f
    lin_g = np.concatenate([base.lin_g, np.zeros(2 * extra)])
    row = base.lin_f.shape[0]
    c = np.zeros(pb_n + extra)
    for t, key in enumerate(q_keys):
        k_q = assembled.q_vars[key]
        k_s = pb_n + t
        lin_f[row, k_q] = 1.0
        lin_f[row, k_s] = -1.0
        lin_f[row + 1, k_q] = -1.0
        lin_f[row + 1, k_s] = -1.0
        row += 2
        c[k_s] = 1.0
    import dataclasses

    hint = base.initial_hint
    widened = dataclasses.replace(
        base,
        n_vars=pb_n + extra,
        c_obj=c,
        lin_f=lin_f,
        lin_g=lin_g,
        lb=np.concatenate([base.lb, np.zeros(extra)]),
        ub=np.concatenate([base.ub, np.full(extra, 1.5 * qb + 1.0)]),
        var_names=(base.var_names or []) + [f"absq_{t}" for t in range(extra)],
        initial_hint=np.concatenate([hint, np.full(extra, 0.5 * qb)]) if hint is not None else None,
    )
    stats["sdp_solves"] += 1
    out = sdp.solve(widened, placement.options)
    if out.status == sdp.OPTIMAL and out.z is not None:
        return out.z[:pb_n]
    return feas.z


def _extract(placement, best_gamma, best_obj, cache, stats, t0, node_limit_hit) -> PlacementResult:
    ok, feas, assembled = _is_feasible_gamma(placement, best_gamma, cache, stats)
    z = _minimal_gain_point(placement, assembled, feas, stats)
    p = assembled.extract_p(z)
    q = assembled.extract_q(z)
    y = assembled.extract_y(z)
    kappa = assembled.extract_kappa(z)
    lam = assembled.extract_lam(z)
    gain = np.linalg.solve(p, q)
    rep = sdp.verify(assembled.problem, z)
    residual = rep.max_residual
    marginal = feas.t_star > -placement.options.feas_tol
    kappa_flag = kappa is not None and kappa < KAPPA_MARGINAL
    stats["wall_time"] = time.monotonic() - t0
    stats["node_limit_hit"] = node_limit_hit
    return PlacementResult(
        gamma=np.array(best_gamma, dtype=float),
        objective=best_obj,
        p=p,
        y=y,
        q=q,
        kappa=kappa,
        lam=lam,
        gain=gain,
        residual=residual,
        marginal=marginal,
        kappa_flag=kappa_flag,
        p_condition=float(np.linalg.cond(p)),
        stats=stats,
    )


def enumerate_placements(placement: PlacementProblem) -> tuple[tuple[int, ...] | None, float]:
    """Brute-force reference: the cheapest admissible binary activation
    that passes the feasibility oracle.  Exponential in the sensor count;
    meant for small test instances."""
    sensors = placement.model.sensors
    n = sensors.n_sensors
    if n > 14:
        raise MisdpError("brute force is capped at 14 sensors")
    stats = {"sdp_solves": 0}
    cache: dict = {}
    best: tuple[int, ...] | None = None
    best_obj = math.inf
    for code in range(2**n):
        gamma = tuple((code >> s) & 1 for s in range(n))
        if not sensors.admits(gamma):
            continue
        obj = float(sensors.weights @ np.array(gamma))
        if obj > best_obj + 1e-9:
            continue
        ok, _, _ = _is_feasible_gamma(placement, gamma, cache, stats)
        if not ok:
            continue
        if obj < best_obj - 1e-9 or (abs(obj - best_obj) <= 1e-9 and (best is None or gamma < best)):
            best, best_obj = gamma, obj
    return best, best_obj
