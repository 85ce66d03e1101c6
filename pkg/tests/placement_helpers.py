"""Small placement instances shared by the misdp tests and the acceptance
suite."""

from __future__ import annotations

import numpy as np

from obsplace import expr as ex
from obsplace.classify import NonlinearityParams
from obsplace.expr import Interval
from obsplace.misdp import PlacementProblem
from obsplace.model import NdsModel, SensorConfig


def linear_model(a, k_min=0, k_max=None, weights=None, force_on=(), force_off=()):
    """A model with zero nonlinearity, identity per-node outputs."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    return NdsModel(
        a=a,
        b=np.zeros((n, 1)),
        c_blocks=tuple(np.eye(1) for _ in range(n)),
        f=tuple(ex.parse("0", n) for _ in range(n)),
        box=tuple(Interval(-1.0, 1.0) for _ in range(n)),
        partition_x=tuple([1] * n),
        partition_u=tuple([1] + [0] * (n - 1)),
        partition_y=tuple([1] * n),
        u_ss=np.zeros(1),
        sensors=SensorConfig(
            weights=np.ones(n) if weights is None else np.asarray(weights, dtype=float),
            k_min=k_min,
            k_max=k_max,
            force_on=frozenset(force_on),
            force_off=frozenset(force_off),
        ),
    )


def lipschitz_placement(a, beta, y_bound=10.0, **sensor_kw) -> PlacementProblem:
    m = linear_model(a, **sensor_kw)
    params = NonlinearityParams(
        class_tag="Lipschitz", method="analytic-input", certificate=True,
        beta=float(beta), beta_rows=None,
    )
    n, ny = m.n_x, m.n_y
    return PlacementProblem(
        model=m,
        params=params,
        variant="lipschitz",
        y_lo=-y_bound * np.ones((n, ny)),
        y_hi=y_bound * np.ones((n, ny)),
    )


def random_placement(rng: np.random.Generator, n_x: int, beta_max=0.5) -> PlacementProblem:
    """A random instance built to be decisive: either comfortably stable or
    strongly unstable, with the matrix norm well above the strictness floor
    so feasibility verdicts stay far from the classification margin."""
    a = rng.normal(size=(n_x, n_x))
    a *= float(rng.uniform(2.5, 6.0)) / max(np.linalg.norm(a, "fro"), 1e-9)
    top = np.max(np.real(np.linalg.eigvals(a)))
    if rng.random() < 0.5:
        a -= (top + float(rng.uniform(0.3, 0.8))) * np.eye(n_x)   # stable
    else:
        a += (float(rng.uniform(1.2, 2.0)) - top) * np.eye(n_x)   # strongly unstable
    k_min = int(rng.integers(0, 2))
    k_max = int(rng.integers(max(1, k_min), n_x + 1))
    m = linear_model(a, k_min=k_min, k_max=k_max)
    beta = float(rng.uniform(0.0, beta_max))
    params = NonlinearityParams(
        class_tag="Lipschitz", method="analytic-input", certificate=True, beta=beta
    )
    bound = float(rng.uniform(2.0, 20.0))
    lo = -bound * np.ones((n_x, n_x))
    hi = bound * np.ones((n_x, n_x))
    return PlacementProblem(model=m, params=params, variant="lipschitz", y_lo=lo, y_hi=hi)
