"""Certified constants for the four nonlinearity classes.

Gradient-based classes (Lipschitz, bounded Jacobian) are estimated either
by low-discrepancy sampling of the gradient norm or certified by interval
branch-and-bound over symbolic partial derivatives.  The two-point classes
(one-sided Lipschitz, quadratic inner bound) are sampling-only: their
objectives have a removable singularity on the diagonal that natural
interval extension handles poorly, so no certified path is offered and the
results are flagged accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expr as ex
from . import intervalopt, lds
from .expr import Expr, Interval
from .model import NdsModel

__all__ = [
    "ClassifyError",
    "EstimatorSettings",
    "NonlinearityParams",
    "grad_norm_expr",
    "lipschitz_rowwise",
    "jacobian_bounds",
    "osl_constant",
    "qib_constants",
    "params_to_dict",
    "params_from_dict",
]

METHODS = ("lds", "interval", "analytic-input")

_KINKED = ("abs", "min", "max")

QIB_DELTA2_GRID = (-10.0, -5.0, -2.0, -1.0, 0.0, 1.0, 2.0, 5.0, 10.0)


class ClassifyError(Exception):
    pass


@dataclass(frozen=True)
class EstimatorSettings:
    samples: int = 2**14
    kind: str = "halton"
    seed: int = 0
    eps_h: float = 1e-4
    eps_x: float | None = None
    max_boxes: int = 100_000


@dataclass
class NonlinearityParams:
    """Constants certifying membership of f in one function class.

    ``certificate`` is true only when the interval engine produced the
    numbers, in which case they are true bounds over the whole state box
    rather than sample maxima.
    """

    class_tag: str  # BoundedJacobian | Lipschitz | OneSidedLipschitz | QIB
    method: str
    certificate: bool
    beta: float | None = None
    beta_rows: list[float] | None = None
    jac_lo: np.ndarray | None = None
    jac_hi: np.ndarray | None = None
    rho: float | None = None
    delta1: float | None = None
    delta2: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.beta is not None and self.beta < 0:
            raise ClassifyError("a Lipschitz constant cannot be negative")
        if self.jac_lo is not None and self.jac_hi is not None:
            if np.any(self.jac_lo > self.jac_hi):
                raise ClassifyError("lower Jacobian bounds exceed upper bounds")


def _has_kink(e: Expr) -> bool:
    if e.op in _KINKED:
        return True
    return any(_has_kink(a) for a in e.args)


def _require_smooth(model: NdsModel) -> None:
    for i, e in enumerate(model.f):
        if _has_kink(e):
            raise ClassifyError(
                f"f[{i + 1}] contains abs/min/max, which breaks the continuous-derivative "
                "requirement for gradient-based classes; supply constants via the "
                "analytic-input method instead"
            )


def grad_norm_expr(f_i: Expr, n_vars: int) -> Expr:
    """The Euclidean norm of the gradient of one row, as an expression.

    Built from symbolic partials so the same tree feeds both exact sampling
    and interval enclosure.  Squares come out as even powers, which the
    interval extension tightens.
    """
    terms: list[Expr] = []
    for j in range(n_vars):
        p = ex.derivative(f_i, j)
        if p.op == "const" and p.value == 0.0:
            continue
        terms.append(ex.pow_int(p, 2))
    if not terms:
        return ex.const(0.0)
    total = terms[0]
    for t in terms[1:]:
        total = ex.add(total, t)
    return ex.sqrt(total)


@dataclass(frozen=True)
class LipschitzResult:
    beta_rows: list[float]
    beta: float
    method: str
    certificate: bool
    diagnostics: dict

    def params(self) -> NonlinearityParams:
        return NonlinearityParams(
            class_tag="Lipschitz",
            method=self.method,
            certificate=self.certificate,
            beta=self.beta,
            beta_rows=list(self.beta_rows),
            diagnostics=dict(self.diagnostics),
        )


def _aggregate(beta_rows: Sequence[float]) -> float:
    return math.sqrt(sum(b * b for b in beta_rows))


def lipschitz_rowwise(
    model: NdsModel,
    method: str = "interval",
    settings: EstimatorSettings = EstimatorSettings(),
    analytic_rows: Sequence[float] | None = None,
) -> LipschitzResult:
    """Per-row gradient-norm maxima and their aggregate Lipschitz constant.

    Row constants combine as sqrt(sum of squares): with |f_i(x) - f_i(x')|
    <= beta_i ||x - x'|| rowwise, the vector bound is the root of the sum of
    the squared row constants.  The root-of-plain-sum variant is reported in
    the diagnostics for comparison but is not used.
    """
    box = list(model.box)
    diagnostics: dict = {"rows": []}
    if method == "analytic-input":
        if analytic_rows is None or len(analytic_rows) != model.n_x:
            raise ClassifyError("analytic-input needs one row constant per state")
        rows = [float(v) for v in analytic_rows]
        if any(v < 0 for v in rows):
            raise ClassifyError("row constants must be nonnegative")
        diagnostics["rows"] = [{"source": "user"} for _ in rows]
        cert = True  # trusted as supplied; provenance recorded
    elif method == "lds":
        _require_smooth(model)
        rows = []
        for i, f_i in enumerate(model.f):
            norm_e = grad_norm_expr(f_i, model.n_x)
            out = lds.estimate_max(
                lambda x, e=norm_e: ex.evaluate(e, x),
                box,
                settings.samples,
                kind=settings.kind,
                seed=settings.seed,
            )
            rows.append(out.value)
            diagnostics["rows"].append(
                {"samples": out.samples, "last_improvement": out.last_improvement}
            )
        cert = False
    elif method == "interval":
        _require_smooth(model)
        rows = []
        for i, f_i in enumerate(model.f):
            norm_e = grad_norm_expr(f_i, model.n_x)
            out = intervalopt.maximize(
                norm_e,
                box,
                eps_h=settings.eps_h,
                eps_x=settings.eps_x,
                max_boxes=settings.max_boxes,
            )
            rows.append(out.upper)
            diagnostics["rows"].append(
                {
                    "lower": out.lower,
                    "upper": out.upper,
                    "boxes": out.iterations,
                    "budget_limited": out.budget_limited,
                }
            )
            if out.budget_limited and out.gap > 10 * settings.eps_h:
                diagnostics["rows"][-1]["warning"] = "bracket did not close within budget"
        cert = True
    else:
        raise ClassifyError(f"unknown method {method!r}; expected one of {METHODS}")

    beta = _aggregate(rows)
    diagnostics["aggregate_rule"] = "sqrt_sum_of_squares"
    diagnostics["aggregate_sqrt_of_plain_sum"] = math.sqrt(sum(rows)) if all(
        r >= 0 for r in rows
    ) else None
    return LipschitzResult(
        beta_rows=rows, beta=beta, method=method, certificate=cert, diagnostics=diagnostics
    )


def jacobian_bounds(
    model: NdsModel,
    method: str = "interval",
    settings: EstimatorSettings = EstimatorSettings(),
) -> tuple[np.ndarray, np.ndarray]:
    """Entrywise bounds on the Jacobian of f over the state box.

    The upper bound of each entry is the maximum of the partial; the lower
    bound is the negated maximum of its negation, so both sides share one
    engine.
    """
    if method not in ("lds", "interval"):
        raise ClassifyError("jacobian_bounds supports the lds and interval methods")
    _require_smooth(model)
    n = model.n_x
    box = list(model.box)
    lo = np.zeros((n, n))
    hi = np.zeros((n, n))
    for i, f_i in enumerate(model.f):
        for j in range(n):
            p = ex.derivative(f_i, j)
            if p.op == "const":
                lo[i, j] = hi[i, j] = p.value
                continue
            if method == "interval":
                up = intervalopt.maximize(
                    p, box, eps_h=settings.eps_h, eps_x=settings.eps_x,
                    max_boxes=settings.max_boxes,
                ).upper
                down = intervalopt.maximize(
                    ex.neg(p), box, eps_h=settings.eps_h, eps_x=settings.eps_x,
                    max_boxes=settings.max_boxes,
                ).upper
            else:
                up = lds.estimate_max(
                    lambda x, e=p: ex.evaluate(e, x), box, settings.samples,
                    kind=settings.kind, seed=settings.seed,
                ).value
                down = lds.estimate_max(
                    lambda x, e=p: -ex.evaluate(e, x), box, settings.samples,
                    kind=settings.kind, seed=settings.seed,
                ).value
            hi[i, j] = up
            lo[i, j] = -down
    # interval overshoot can invert a constant-entry pair by epsilon
    swap = lo > hi
    if np.any(swap):
        mid = 0.5 * (lo[swap] + hi[swap])
        lo[swap] = hi[swap] = mid
    return lo, hi


def _pair_objective_osl(f):
    def obj(x, x_hat):
        dx = x - x_hat
        df = f(x) - f(x_hat)
        return float(df @ dx / (dx @ dx))

    return obj


def osl_constant(model: NdsModel, settings: EstimatorSettings = EstimatorSettings()) -> NonlinearityParams:
    """One-sided Lipschitz constant by pairwise sampling; never certified."""
    f = model.f_vector()
    out = lds.estimate_max_pairs(
        _pair_objective_osl(f),
        list(model.box),
        settings.samples,
        kind=settings.kind,
        seed=settings.seed,
    )
    return NonlinearityParams(
        class_tag="OneSidedLipschitz",
        method="lds",
        certificate=False,
        rho=out.value,
        diagnostics={"samples": out.samples, "last_improvement": out.last_improvement},
    )


def qib_constants(
    model: NdsModel,
    settings: EstimatorSettings = EstimatorSettings(),
    delta2_grid: Sequence[float] = QIB_DELTA2_GRID,
    validation_samples: int = 10_000,
) -> NonlinearityParams:
    """Quadratic-inner-bound pair (delta1, delta2).

    delta2 runs over a fixed grid; each candidate gets its minimal delta1
    from the pairwise supremum of (||df||^2 - delta2 <df, dx>) / ||dx||^2,
    and the winner minimizes delta1 + |delta2|.  A fresh validation sample
    must satisfy the defining inequality; on failure delta1 is widened by
    10% up to five times.
    """
    f = model.f_vector()
    box = list(model.box)

    def d1_for(delta2: float) -> float:
        def obj(x, x_hat):
            dx = x - x_hat
            df = f(x) - f(x_hat)
            return float((df @ df - delta2 * (df @ dx)) / (dx @ dx))

        return lds.estimate_max_pairs(
            obj, box, settings.samples, kind=settings.kind, seed=settings.seed
        ).value

    candidates = [(d1_for(d2), d2) for d2 in delta2_grid]
    # nonnegative delta1 always suffices as a bound; clamp before scoring
    candidates = [(max(d1, 0.0), d2) for d1, d2 in candidates]
    delta1, delta2 = min(candidates, key=lambda c: c[0] + abs(c[1]))
    # the sampled supremum is a lower bound on the true one, so pad it a
    # little before validation or any fresh sample can break the inequality
    delta1 *= 1.02

    seq = lds.generate(settings.kind, 2 * model.n_x, validation_samples, seed=settings.seed + 1)
    lo, hi = model.box_lo(), model.box_hi()
    pts = np.concatenate([lo, lo]) + seq.points * np.concatenate([hi - lo, hi - lo])
    for round_ in range(6):
        worst = 0.0
        ok = True
        for p in pts:
            x, x_hat = p[: model.n_x], p[model.n_x:]
            dx = x - x_hat
            if np.linalg.norm(dx) < 1e-9:
                continue
            df = f(x) - f(x_hat)
            slack = delta1 * (dx @ dx) + delta2 * (df @ dx) - df @ df
            if slack < -1e-9:
                ok = False
                worst = min(worst, slack)
        if ok:
            break
        if round_ == 5:
            raise ClassifyError(
                f"quadratic inner bound failed validation even after widening (slack {worst})"
            )
        delta1 = delta1 * 1.1 if delta1 > 0 else 1e-9
    return NonlinearityParams(
        class_tag="QIB",
        method="lds",
        certificate=False,
        delta1=float(delta1),
        delta2=float(delta2),
        diagnostics={"grid": list(delta2_grid), "validation_samples": validation_samples},
    )


# ---------------------------------------------------------------------------
# Report serialization
# ---------------------------------------------------------------------------


def params_to_dict(p: NonlinearityParams) -> dict:
    return {
        "class": p.class_tag,
        "method": p.method,
        "certificate": p.certificate,
        "constants": {
            "beta": p.beta,
            "beta_rows": p.beta_rows,
            "jac_lo": p.jac_lo.tolist() if p.jac_lo is not None else None,
            "jac_hi": p.jac_hi.tolist() if p.jac_hi is not None else None,
            "rho": p.rho,
            "delta1": p.delta1,
            "delta2": p.delta2,
        },
        "diagnostics": p.diagnostics,
    }


def params_from_dict(doc: dict) -> NonlinearityParams:
    try:
        consts = doc["constants"]
        return NonlinearityParams(
            class_tag=doc["class"],
            method=doc["method"],
            certificate=bool(doc["certificate"]),
            beta=consts.get("beta"),
            beta_rows=consts.get("beta_rows"),
            jac_lo=np.asarray(consts["jac_lo"], dtype=float) if consts.get("jac_lo") is not None else None,
            jac_hi=np.asarray(consts["jac_hi"], dtype=float) if consts.get("jac_hi") is not None else None,
            rho=consts.get("rho"),
            delta1=consts.get("delta1"),
            delta2=consts.get("delta2"),
            diagnostics=doc.get("diagnostics", {}),
        )
    except KeyError as err:
        raise ClassifyError(f"parameter report is missing {err}") from err
