"""Rigorous global maximization over a box by interval branch-and-bound.

Two phases drive a cover of sub-boxes: the first repeatedly splits the box
carrying the greatest enclosure upper bound until either the bracket closes
or that box becomes atomic; the second keeps splitting any non-atomic box,
best upper bound first.  The certified upper bound ``u`` is the largest
enclosure top across the cover; the certified lower bound ``l`` comes from
exact midpoint evaluations, so the true maximum always lies in [l, u].
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import DomainError, Expr, Interval, evaluate, interval_eval, max_var_index

__all__ = ["Box", "Cover", "MaximizeResult", "maximize", "split", "prune"]

Box = tuple[Interval, ...]


class AtomicBoxError(ValueError):
    """Split requested on a box at or below the width floor."""


def split(box: Box, eps_x: float = 0.0) -> tuple[Box, Box]:
    """Bisect the widest side at its midpoint.

    Ties on width break to the lowest coordinate index; the union of the
    children equals the parent exactly.
    """
    widths = [iv.width for iv in box]
    k = int(np.argmax(widths))
    if widths[k] <= eps_x:
        raise AtomicBoxError(f"box width {widths[k]} is at the atomic floor {eps_x}")
    iv = box[k]
    mid = iv.mid
    left = tuple(Interval(b.lo, mid) if j == k else b for j, b in enumerate(box))
    right = tuple(Interval(mid, b.hi) if j == k else b for j, b in enumerate(box))
    return left, right


@dataclass
class _Entry:
    box: Box
    enclosure: Interval


@dataclass
class Cover:
    """Cover of candidate boxes with cached enclosures and global bounds.

    Invariant: every global maximizer of the objective stays inside the
    union of the boxes, and l <= max <= u at all times.
    """

    entries: list[_Entry]
    lower: float
    upper: float
    witness: np.ndarray | None = None


def prune(cover: Cover) -> Cover:
    """Drop boxes whose enclosure top is strictly below the certified lower
    bound.  Inclusion guarantees no maximizer is discarded: the witness box
    encloses its own exact value, so it always survives."""
    kept = [e for e in cover.entries if e.enclosure.hi >= cover.lower]
    return Cover(entries=kept, lower=cover.lower, upper=cover.upper, witness=cover.witness)


@dataclass(frozen=True)
class MaximizeResult:
    lower: float
    upper: float
    witness: np.ndarray
    iterations: int
    atomic_count: int
    budget_limited: bool = False

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def _midpoint(box: Box) -> np.ndarray:
    return np.array([iv.mid for iv in box])


def maximize(
    objective: Expr,
    box: Sequence[Interval],
    eps_h: float = 1e-4,
    eps_x: float | None = None,
    max_boxes: int = 100_000,
    trace: list[tuple[float, float]] | None = None,
) -> MaximizeResult:
    """Certified bracket [l, u] of the maximum of ``objective`` on ``box``.

    ``eps_h`` is the target bracket width, ``eps_x`` the atomic box width
    below which no side is split (default 1e-6 of the widest initial side).
    On budget exhaustion the result is flagged but stays sound: ``u`` is
    still a valid upper bound.

    Dimensions the objective does not involve are never split; the box is
    projected onto the active variables up front.
    """
    full_box: Box = tuple(box)
    if eps_x is None:
        eps_x = 1e-6 * max(iv.width for iv in full_box) if full_box else 1e-6
    if eps_h <= 0 or eps_x < 0:
        raise ValueError("eps_h must be positive and eps_x nonnegative")

    n_active = max_var_index(objective) + 1
    active = list(range(n_active))
    work_box: Box = tuple(full_box[j] for j in active)
    fixed_tail = _midpoint(tuple(full_box[n_active:])) if len(full_box) > n_active else np.array([])

    def lift(point: np.ndarray) -> np.ndarray:
        return np.concatenate([point, fixed_tail])

    def encl(b: Box) -> Interval:
        return interval_eval(objective, list(b))

    def exact(point: np.ndarray) -> float:
        return evaluate(objective, point)

    counter = itertools.count()
    root = _Entry(work_box, encl(work_box))
    lower = exact(_midpoint(work_box))
    witness = _midpoint(work_box)
    upper = root.enclosure.hi

    # heap of splittable boxes ordered by enclosure top (then age); atomic
    # boxes move to a side list but keep contributing to u
    heap: list[tuple[float, int, _Entry]] = []
    atomic: list[_Entry] = []

    def is_atomic(b: Box) -> bool:
        return (not b) or max(iv.width for iv in b) <= eps_x

    def push(entry: _Entry):
        if is_atomic(entry.box):
            atomic.append(entry)
        else:
            heapq.heappush(heap, (-entry.enclosure.hi, next(counter), entry))

    push(root)
    iterations = 0
    budget_limited = False

    def current_upper() -> float:
        tops = [-heap[0][0]] if heap else []
        tops += [e.enclosure.hi for e in atomic]
        return max(tops) if tops else lower

    def attempt(entry: _Entry) -> None:
        # Certify l by exact evaluation at the midpoint and the two extreme
        # corners of each child; the corners are what let the bracket close
        # when the maximizer sits on the boundary of the original box.
        nonlocal lower, witness
        left, right = split(entry.box, eps_x)
        for child in (left, right):
            child_entry = _Entry(child, encl(child))
            for probe in (
                _midpoint(child),
                np.array([iv.lo for iv in child]),
                np.array([iv.hi for iv in child]),
            ):
                val = exact(probe)
                if val > lower:
                    lower, witness = val, probe
            push(child_entry)

    def drop_pruned():
        nonlocal atomic
        atomic = [e for e in atomic if e.enclosure.hi >= lower]
        while heap and -heap[0][0] < lower:
            heapq.heappop(heap)

    # Phase I: drive the greatest upper bound down until the best box is
    # atomic or the bracket closes.
    while True:
        upper = current_upper()
        if upper - lower <= eps_h:
            break
        if not heap or (atomic and max(e.enclosure.hi for e in atomic) >= -heap[0][0]):
            break  # the best box is atomic: phase I cannot shrink u further
        if iterations >= max_boxes:
            budget_limited = True
            break
        _, _, best = heapq.heappop(heap)
        attempt(best)
        iterations += 1
        drop_pruned()
        if trace is not None:
            trace.append((lower, current_upper()))

    # Phase II: improve the bracket by splitting any remaining non-atomic
    # box, best upper bound first, oldest first on ties.
    while not budget_limited:
        upper = current_upper()
        if upper - lower <= eps_h or not heap:
            break
        if iterations >= max_boxes:
            budget_limited = True
            break
        _, _, entry = heapq.heappop(heap)
        attempt(entry)
        iterations += 1
        drop_pruned()
        if trace is not None:
            trace.append((lower, current_upper()))

    upper = current_upper()
    if upper < lower:  # guard fp asymmetry between exact and interval paths
        upper = lower
    return MaximizeResult(
        lower=lower,
        upper=upper,
        witness=lift(witness) if witness is not None else None,
        iterations=iterations,
        atomic_count=len(atomic),
        budget_limited=budget_limited,
    )
