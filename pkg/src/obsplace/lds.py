"""Low-discrepancy sequences and point-based maximum estimation.

The estimator walks a Halton, Sobol or seeded-uniform point set mapped into
a box and keeps the running maximum of an objective.  It is a lower bound
on the true supremum by construction; the companion interval optimizer
provides the certified upper side.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import qmc

from .expr import Interval

__all__ = ["SampleSequence", "EstimateResult", "generate", "estimate_max", "estimate_max_pairs"]

KINDS = ("halton", "sobol", "random")

_SOBOL_MAX_DIM = 64


class EstimationError(Exception):
    """Objective evaluation failed at a sample point."""

    def __init__(self, message: str, point: np.ndarray | None = None):
        super().__init__(message)
        self.point = point


@dataclass(frozen=True)
class SampleSequence:
    """A realized point set in the unit cube plus its provenance.

    Reproducibility contract: identical (kind, dim, count, seed) give a
    bitwise-identical ``points`` array.
    """

    kind: str
    dim: int
    count: int
    seed: int
    points: np.ndarray  # (count, dim) in [0, 1]


def _first_primes(k: int) -> list[int]:
    primes: list[int] = []
    n = 2
    while len(primes) < k:
        if all(n % p for p in primes):
            primes.append(n)
        n += 1
    return primes


def _radical_inverse(index: int, base: int) -> float:
    inv, denom = 0.0, 1.0
    while index > 0:
        index, digit = divmod(index, base)
        denom *= base
        inv += digit / denom
    return inv


def _halton(dim: int, count: int) -> np.ndarray:
    bases = _first_primes(dim)
    out = np.empty((count, dim))
    for j, b in enumerate(bases):
        out[:, j] = [_radical_inverse(i, b) for i in range(1, count + 1)]
    return out


def generate(kind: str, dim: int, count: int, seed: int = 0) -> SampleSequence:
    """Realize ``count`` points of the requested sequence in [0, 1]^dim.

    Halton uses the first ``dim`` primes as radical-inverse bases (index
    starts at 1, so the first 1-d point is 1/2).  Sobol points come from
    direction numbers and are limited to 64 dimensions.  Both ignore the
    seed; only the ``random`` kind consumes it.
    """
    if dim < 1 or count < 1:
        raise ValueError("dim and count must be positive")
    if kind == "halton":
        pts = _halton(dim, count)
    elif kind == "sobol":
        if dim > _SOBOL_MAX_DIM:
            raise ValueError(f"sobol direction-number table covers dim <= {_SOBOL_MAX_DIM}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # balance warning for non power-of-two counts
            pts = qmc.Sobol(d=dim, scramble=False).random(count)
    elif kind == "random":
        pts = np.random.default_rng(seed).random((count, dim))
    else:
        raise ValueError(f"unknown sequence kind {kind!r}; expected one of {KINDS}")
    pts = np.asarray(pts, dtype=float)
    pts.setflags(write=False)
    return SampleSequence(kind=kind, dim=dim, count=count, seed=seed, points=pts)


def _box_arrays(box: Sequence[Interval]) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([iv.lo for iv in box])
    hi = np.array([iv.hi for iv in box])
    return lo, hi


def map_to_box(seq: SampleSequence, box: Sequence[Interval]) -> np.ndarray:
    """Affine image of the unit-cube points inside the box."""
    lo, hi = _box_arrays(box)
    if len(box) != seq.dim:
        raise ValueError("box dimension does not match the sequence")
    return lo + seq.points * (hi - lo)


@dataclass(frozen=True)
class EstimateResult:
    value: float
    argmax: np.ndarray
    last_improvement: int  # 1-based sample index of the final improvement
    samples: int

    def __float__(self) -> float:
        return self.value


def estimate_max(
    objective: Callable[[np.ndarray], float],
    box: Sequence[Interval],
    count: int,
    kind: str = "halton",
    seed: int = 0,
) -> EstimateResult:
    """Running maximum of ``objective`` over ``count`` sequence points.

    Never exceeds the true supremum.  The argmax point and the index of the
    last improvement are reported so callers can judge saturation.
    """
    seq = generate(kind, len(box), count, seed)
    pts = map_to_box(seq, box)
    best = -np.inf
    best_point = pts[0]
    last = 0
    for i, p in enumerate(pts):
        try:
            v = float(objective(p))
        except Exception as err:
            raise EstimationError(f"objective failed at sample {i + 1}: {err}", p) from err
        if v > best:
            best, best_point, last = v, p, i + 1
    return EstimateResult(value=best, argmax=best_point, last_improvement=last, samples=count)


def estimate_max_pairs(
    objective: Callable[[np.ndarray, np.ndarray], float],
    box: Sequence[Interval],
    count: int,
    kind: str = "halton",
    seed: int = 0,
    min_separation: float = 1e-9,
) -> EstimateResult:
    """Running maximum of a two-point objective over the product box.

    A single low-discrepancy sequence of twice the dimension supplies both
    points of each pair, which keeps the discrepancy low on the product box
    rather than pairing two independent sequences.  Nearly coincident pairs
    are skipped.
    """
    n = len(box)
    seq = generate(kind, 2 * n, count, seed)
    lo, hi = _box_arrays(box)
    pts = np.concatenate([lo, lo]) + seq.points * np.concatenate([hi - lo, hi - lo])
    best = -np.inf
    best_point = pts[0]
    last = 0
    for i, p in enumerate(pts):
        x, x_hat = p[:n], p[n:]
        if np.linalg.norm(x - x_hat) < min_separation:
            continue
        try:
            v = float(objective(x, x_hat))
        except Exception as err:
            raise EstimationError(f"objective failed at sample {i + 1}: {err}", p) from err
        if v > best:
            best, best_point, last = v, p, i + 1
    if not np.isfinite(best):
        raise EstimationError("every sampled pair was degenerate")
    return EstimateResult(value=best, argmax=best_point, last_improvement=last, samples=count)
