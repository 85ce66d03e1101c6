"""Stretched-highway traffic model: mainline segments, on-ramps, off-ramps.

Reconstruction notes (all recorded in the demo metadata): the flux on every
element is the free-flow parabola q(rho) = v_f * rho * (1 - rho/rho_m);
segment i receives the upstream flux reduced by the exit ratio of an
off-ramp attached at its upstream interface plus the discharge of an
on-ramp attached to it, and sheds its own flux downstream; an on-ramp is a
queue filled by its exogenous demand and discharged at the parabola rate;
an off-ramp is a queue filled by its share of the upstream flux and drained
at the parabola rate.  States are ordered mainline first, then on-ramps,
then off-ramps; the linear flux parts live in the A matrix and the pure
quadratic parts in f; inflow demands enter through B (off-ramp entries of
the demand vector are carried but not routed, since the off-ramp equation
has no exogenous term).  All densities live in [0, rho_c], the free-flow
half of the jam density.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from .expr import Expr, Interval
from .model import NdsModel, SensorConfig

__all__ = [
    "HighwayConfig",
    "TrafficError",
    "build_traffic_model",
    "paper_experiment_config",
    "small_experiment_config",
    "analytic_row_bounds",
    "physical_element",
    "reconstruction_metadata",
    "quadratic_structure_ok",
]


class TrafficError(Exception):
    pass


@dataclass(frozen=True)
class HighwayConfig:
    """Geometry and parameters of one stretched highway.

    Attachment indices are 1-based mainline segment numbers.  An off-ramp
    attached at segment s diverts its exit ratio from the s -> s+1
    interface flux; an on-ramp attached at segment s discharges into s.
    """

    n_mainline: int
    on_ramps: tuple[int, ...] = ()
    off_ramps: tuple[int, ...] = ()
    exit_ratios: tuple[float, ...] = ()
    segment_length: float = 500.0       # m
    free_flow_speed: float = 31.3       # m/s
    jam_density: float = 0.053          # veh/m
    inflows: tuple[float, ...] = ()     # boundary + one per on-ramp + one per off-ramp
    k_min: int = 1
    k_max: int | None = None
    closed_downstream: bool = False     # drop the last segment's outflow (conservation tests)

    def __post_init__(self):
        if self.n_mainline < 1:
            raise TrafficError("need at least one mainline segment")
        if len(self.off_ramps) != len(self.exit_ratios):
            raise TrafficError("one exit ratio per off-ramp")
        for s in self.on_ramps + self.off_ramps:
            if not (1 <= s <= self.n_mainline):
                raise TrafficError(f"ramp attachment {s} outside the mainline range")
        for a in self.exit_ratios:
            if not (0.0 < a < 1.0):
                raise TrafficError("exit ratios must lie strictly between 0 and 1")
        if not (0 < self.critical_density < self.jam_density):
            raise TrafficError("densities must order as 0 < rho_c < rho_m")
        expected = 1 + len(self.on_ramps) + len(self.off_ramps)
        if self.inflows and len(self.inflows) != expected:
            raise TrafficError(f"need {expected} inflow entries (boundary, on-ramps, off-ramps)")

    @property
    def critical_density(self) -> float:
        return self.jam_density / 2.0

    @property
    def n_states(self) -> int:
        return self.n_mainline + len(self.on_ramps) + len(self.off_ramps)


def paper_experiment_config() -> HighwayConfig:
    """The full-scale experiment: 10 mainline segments, 2 on-ramps, 4
    off-ramps, steady demand, at most 8 of the 16 sensors active."""
    return HighwayConfig(
        n_mainline=10,
        on_ramps=(3, 7),
        off_ramps=(2, 4, 6, 8),
        exit_ratios=(0.2, 0.3, 0.4, 0.5),
        segment_length=500.0,
        free_flow_speed=31.3,
        jam_density=0.053,
        inflows=(0.2, 0.1, 0.1, 0.01, 0.01, 0.01, 0.01),
        k_min=1,
        k_max=8,
    )


def small_experiment_config() -> HighwayConfig:
    """Desk-scale variant: 4 mainline segments, one ramp of each kind."""
    return HighwayConfig(
        n_mainline=4,
        on_ramps=(2,),
        off_ramps=(3,),
        exit_ratios=(0.3,),
        segment_length=500.0,
        free_flow_speed=31.3,
        jam_density=0.053,
        inflows=(0.2, 0.1, 0.01),
        k_min=1,
        k_max=3,
    )


def _quad_term(coef: float, state: int) -> str:
    return f"({coef!r})*x{state + 1}^2"


def build_traffic_model(config: HighwayConfig) -> NdsModel:
    """Assemble the network as a box-bounded model with identity outputs.

    Every state's flux v_f*rho - (v_f/rho_m)*rho^2 splits between A (the
    linear part) and f (the quadratic part), so f is a vector of pure
    degree-2 polynomials.
    """
    n_m = config.n_mainline
    n = config.n_states
    v = config.free_flow_speed
    length = config.segment_length
    c_quad = v / config.jam_density  # quadratic flux coefficient
    lin = v / length
    quad = c_quad / length

    on_index = {seg: n_m + k for k, seg in enumerate(config.on_ramps)}
    off_index = {seg: n_m + len(config.on_ramps) + k for k, seg in enumerate(config.off_ramps)}
    exit_ratio = dict(zip(config.off_ramps, config.exit_ratios))

    a = np.zeros((n, n))
    terms: list[list[str]] = [[] for _ in range(n)]

    def add_flux(row: int, col: int, scale: float):
        """scale * q(rho_col) / length into row's equation."""
        a[row, col] += scale * lin
        terms[row].append(_quad_term(-scale * quad, col))

    for i in range(n_m):
        # upstream contribution
        if i > 0:
            keep = 1.0 - exit_ratio.get(i, 0.0)  # off-ramp at segment i (1-based i)
            add_flux(i, i - 1, keep)
        # on-ramp discharge into this segment
        ramp = on_index.get(i + 1)
        if ramp is not None:
            add_flux(i, ramp, 1.0)
        # own outflow
        if not (config.closed_downstream and i == n_m - 1):
            add_flux(i, i, -1.0)
    for seg, ramp in on_index.items():
        add_flux(ramp, ramp, -1.0)  # queue discharges at the parabola rate
    for seg, off in off_index.items():
        add_flux(off, seg - 1, exit_ratio[seg])  # its share of the segment's flux
        add_flux(off, off, -1.0)

    f_exprs: list[Expr] = []
    for row_terms in terms:
        text = " + ".join(row_terms) if row_terms else "0"
        f_exprs.append(ex.parse(text, n))

    inflows = config.inflows or tuple([0.0] * (1 + len(config.on_ramps) + len(config.off_ramps)))
    n_u = len(inflows)
    b = np.zeros((n, n_u))
    b[0, 0] = 1.0 / length  # boundary inflow feeds the first segment
    for k, seg in enumerate(config.on_ramps):
        b[on_index[seg], 1 + k] = 1.0 / length
    # off-ramp demand entries are present in u but have no route in this
    # reconstruction; their columns stay zero

    partition_u = tuple([n_u] + [0] * (n - 1))
    rho_c = config.critical_density
    return NdsModel(
        a=a,
        b=b,
        c_blocks=tuple(np.eye(1) for _ in range(n)),
        f=tuple(f_exprs),
        box=tuple(Interval(0.0, rho_c) for _ in range(n)),
        partition_x=tuple([1] * n),
        partition_u=partition_u,
        partition_y=tuple([1] * n),
        u_ss=np.asarray(inflows, dtype=float),
        sensors=SensorConfig(
            weights=np.ones(n),
            k_min=config.k_min,
            k_max=config.k_max if config.k_max is not None else n,
        ),
    )


def analytic_row_bounds(config: HighwayConfig) -> np.ndarray:
    """Closed-form per-row gradient bounds by the triangle inequality.

    Each quadratic term's partial is linear and peaks at rho_c with value
    (v_f/l) times the term's flux share; summing absolute peaks per row
    gives a deliberately conservative bound (the certified norm uses the
    Euclidean combination and is never larger, which keeps the comparison
    between the two meaningful).
    """
    n_m = config.n_mainline
    n = config.n_states
    peak = config.free_flow_speed / config.segment_length  # 2 * c_quad * rho_c / l
    exit_ratio = dict(zip(config.off_ramps, config.exit_ratios))
    bounds = np.zeros(n)
    for i in range(n_m):
        total = 0.0
        if i > 0:
            total += 1.0 - exit_ratio.get(i, 0.0)
        if (i + 1) in config.on_ramps:
            total += 1.0
        if not (config.closed_downstream and i == n_m - 1):
            total += 1.0
        bounds[i] = total * peak
    base = n_m
    for k, seg in enumerate(config.on_ramps):
        bounds[base + k] = peak
    base = n_m + len(config.on_ramps)
    for k, seg in enumerate(config.off_ramps):
        bounds[base + k] = (1.0 + exit_ratio[seg]) * peak
    return bounds


def physical_element(config: HighwayConfig, state_index: int) -> str:
    """Human-readable identity of one state (0-based index)."""
    n_m = config.n_mainline
    if state_index < n_m:
        return f"mainline segment {state_index + 1}"
    k = state_index - n_m
    if k < len(config.on_ramps):
        return f"on-ramp at segment {config.on_ramps[k]}"
    k -= len(config.on_ramps)
    if k < len(config.off_ramps):
        return f"off-ramp at segment {config.off_ramps[k]}"
    raise TrafficError(f"state index {state_index} out of range")


def reconstruction_metadata(config: HighwayConfig) -> dict:
    """Every modeling decision a reader needs to reproduce the network."""
    return {
        "flux": "v_f * rho * (1 - rho / rho_m), free-flow branch only",
        "state_order": "mainline, then on-ramps, then off-ramps",
        "mainline_equation": "rho_i' = (q_{i-1} * (1 - exit_ratio_at_{i-1}) + onramp_discharge - q_i) / l",
        "on_ramp_equation": "rho' = (demand - q(rho)) / l",
        "off_ramp_equation": "rho' = (exit_ratio * q_segment - q(rho)) / l",
        "boundary_inflow": "u[0] feeds mainline segment 1",
        "unrouted_inputs": "off-ramp demand entries of u are carried but not routed",
        "on_ramps_at_segments": list(config.on_ramps),
        "off_ramps_at_segments": list(config.off_ramps),
        "exit_ratios": list(config.exit_ratios),
        "v_f": config.free_flow_speed,
        "rho_m": config.jam_density,
        "rho_c": config.critical_density,
        "segment_length": config.segment_length,
        "state_elements": [physical_element(config, i) for i in range(config.n_states)],
    }


def _poly_degree(e: Expr) -> int | None:
    """Total degree, or None when the tree is not polynomial."""
    if e.op == "const":
        return 0
    if e.op == "var":
        return 1
    if e.op == "neg":
        return _poly_degree(e.args[0])
    if e.op in ("add", "sub"):
        da, db = _poly_degree(e.args[0]), _poly_degree(e.args[1])
        return None if da is None or db is None else max(da, db)
    if e.op == "mul":
        da, db = _poly_degree(e.args[0]), _poly_degree(e.args[1])
        return None if da is None or db is None else da + db
    if e.op == "pow":
        base = _poly_degree(e.args[0])
        return None if base is None or e.exponent < 0 else base * e.exponent
    if e.op == "div":
        da, db = _poly_degree(e.args[0]), _poly_degree(e.args[1])
        if db == 0 and da is not None:
            return da
        return None
    return None


def quadratic_structure_ok(model: NdsModel) -> bool:
    """True when every nonlinearity row is a polynomial of degree <= 2."""
    degrees = [_poly_degree(e) for e in model.f]
    return all(d is not None and d <= 2 for d in degrees)
