"""Data model and file I/O for box-bounded nonlinear dynamic systems.

A system is ``dx/dt = A x + f(x) + B u`` with output ``y = C x``, where the
output matrix is block diagonal over N nodes so individual sensors can be
switched on and off.  The activation pattern gamma expands to a 0/1 block
diagonal matrix acting on the stacked outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from . import expr as ex
from .expr import Expr, Interval

__all__ = [
    "ModelError",
    "NdsModel",
    "SensorConfig",
    "GammaExpansion",
    "load_model",
    "save_model",
    "model_from_dict",
    "model_to_dict",
    "expand_gamma",
    "column_sensor_map",
]


class ModelError(Exception):
    """Schema violation, dimension mismatch or empty state box."""


@dataclass(frozen=True)
class SensorConfig:
    """Admissible sensor configurations: per-sensor weights plus the
    logistic set (cardinality window and forced on/off index sets)."""

    weights: np.ndarray
    k_min: int = 0
    k_max: int | None = None
    force_on: frozenset[int] = frozenset()
    force_off: frozenset[int] = frozenset()

    def __post_init__(self):
        n = len(self.weights)
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if np.any(self.weights < 0):
            raise ModelError("sensor weights must be nonnegative")
        k_max = n if self.k_max is None else self.k_max
        object.__setattr__(self, "k_max", int(k_max))
        if not (0 <= self.k_min <= self.k_max <= n):
            raise ModelError(f"cardinality window [{self.k_min}, {self.k_max}] invalid for {n} sensors")
        if self.force_on & self.force_off:
            raise ModelError("a sensor cannot be forced both on and off")
        for idx in self.force_on | self.force_off:
            if not (0 <= idx < n):
                raise ModelError(f"forced sensor index {idx} out of range")
        if len(self.force_on) > self.k_max or n - len(self.force_off) < self.k_min:
            raise ModelError("forced sets contradict the cardinality window")

    @property
    def n_sensors(self) -> int:
        return len(self.weights)

    def admits(self, gamma: Sequence[int]) -> bool:
        g = np.asarray(gamma, dtype=int)
        if len(g) != self.n_sensors or np.any((g != 0) & (g != 1)):
            return False
        total = int(g.sum())
        if not (self.k_min <= total <= self.k_max):
            return False
        if any(g[i] != 1 for i in self.force_on):
            return False
        if any(g[i] != 0 for i in self.force_off):
            return False
        return True


@dataclass(frozen=True)
class GammaExpansion:
    """Block diagonal 0/1 expansion of an activation vector; idempotent."""

    gamma: tuple[int, ...]
    matrix: np.ndarray


@dataclass(frozen=True)
class NdsModel:
    """Validated system description.

    ``c_blocks[i]`` maps node i's states to its outputs; ``C`` is their
    block diagonal.  ``box`` is the componentwise state domain on which all
    nonlinearity constants are certified.  Immutable after construction and
    safe for concurrent reads.
    """

    a: np.ndarray
    b: np.ndarray
    c_blocks: tuple[np.ndarray, ...]
    f: tuple[Expr, ...]
    box: tuple[Interval, ...]
    partition_x: tuple[int, ...]
    partition_u: tuple[int, ...]
    partition_y: tuple[int, ...]
    u_ss: np.ndarray
    sensors: SensorConfig

    def __post_init__(self):
        n_x = self.a.shape[0]
        if self.a.shape != (n_x, n_x):
            raise ModelError(f"A must be square, got {self.a.shape}")
        if sum(self.partition_x) != n_x:
            raise ModelError("state partition does not sum to n_x")
        if self.b.shape[0] != n_x:
            raise ModelError("B row count does not match n_x")
        if sum(self.partition_u) != self.b.shape[1]:
            raise ModelError("input partition does not sum to n_u")
        if len(self.c_blocks) != len(self.partition_x):
            raise ModelError("need one C block per node")
        for i, (blk, nx_i, ny_i) in enumerate(
            zip(self.c_blocks, self.partition_x, self.partition_y)
        ):
            if blk.shape != (ny_i, nx_i):
                raise ModelError(f"C block {i + 1} must be {ny_i}x{nx_i}, got {blk.shape}")
        if len(self.f) != n_x:
            raise ModelError("need one nonlinearity expression per state")
        for i, e in enumerate(self.f):
            if ex.max_var_index(e) >= n_x:
                raise ModelError(f"f[{i + 1}] refers to a variable beyond x{n_x}")
        if len(self.box) != n_x:
            raise ModelError("state box dimension mismatch")
        if len(self.u_ss) != self.b.shape[1]:
            raise ModelError("steady input dimension mismatch")
        if self.sensors.n_sensors != len(self.partition_x):
            raise ModelError("sensor weights must match the node count")

    @property
    def n_x(self) -> int:
        return self.a.shape[0]

    @property
    def n_u(self) -> int:
        return self.b.shape[1]

    @property
    def n_y(self) -> int:
        return sum(self.partition_y)

    @property
    def n_nodes(self) -> int:
        return len(self.partition_x)

    @property
    def c(self) -> np.ndarray:
        return scipy.linalg.block_diag(*self.c_blocks) if self.c_blocks else np.zeros((0, 0))

    def f_vector(self):
        """Compiled nonlinearity callable x -> f(x)."""
        return ex.compile_vector_field(self.f, self.n_x)

    def box_lo(self) -> np.ndarray:
        return np.array([iv.lo for iv in self.box])

    def box_hi(self) -> np.ndarray:
        return np.array([iv.hi for iv in self.box])


def expand_gamma(gamma: Sequence[int], partition_y: Sequence[int]) -> GammaExpansion:
    """Expand an activation vector to its block diagonal 0/1 matrix: sensor
    j on means its n_{y_j} output rows pass through."""
    if len(gamma) != len(partition_y):
        raise ModelError(f"gamma has {len(gamma)} entries for {len(partition_y)} nodes")
    diag = np.concatenate(
        [np.full(ny, float(g)) for g, ny in zip(gamma, partition_y)]
        or [np.zeros(0)]
    )
    return GammaExpansion(gamma=tuple(int(g) for g in gamma), matrix=np.diag(diag))


def column_sensor_map(partition_y: Sequence[int]) -> list[int]:
    """Owning sensor index for every output column (0-based).

    Column j of any matrix right-multiplied by the gamma expansion is scaled
    by the gamma entry of its owner.
    """
    owners: list[int] = []
    for sensor, ny in enumerate(partition_y):
        owners.extend([sensor] * ny)
    return owners


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------

_REQUIRED = (
    "n_x",
    "n_u",
    "N",
    "partition_x",
    "partition_u",
    "partition_y",
    "A",
    "B",
    "C_blocks",
    "f",
    "box_lo",
    "box_hi",
    "u_ss",
    "weights_c",
    "logistic",
)


def model_from_dict(doc: dict) -> NdsModel:
    missing = [k for k in _REQUIRED if k not in doc]
    if missing:
        raise ModelError(f"model file is missing keys: {', '.join(missing)}")
    n_x, n_u, n_nodes = int(doc["n_x"]), int(doc["n_u"]), int(doc["N"])
    part_x = tuple(int(v) for v in doc["partition_x"])
    part_u = tuple(int(v) for v in doc["partition_u"])
    part_y = tuple(int(v) for v in doc["partition_y"])
    if len(part_x) != n_nodes or len(part_y) != n_nodes:
        raise ModelError("partitions must list one entry per node")
    if sum(part_x) != n_x:
        raise ModelError(f"partition_x sums to {sum(part_x)}, expected n_x = {n_x}")
    if sum(part_u) != n_u:
        raise ModelError(f"partition_u sums to {sum(part_u)}, expected n_u = {n_u}")

    def matrix(key: str, rows: int, cols: int) -> np.ndarray:
        flat = np.asarray(doc[key], dtype=float)
        if flat.shape != (rows * cols,):
            raise ModelError(f"{key} must be a row-major array of {rows * cols} numbers")
        return flat.reshape(rows, cols)

    a = matrix("A", n_x, n_x)
    b = matrix("B", n_x, n_u)
    raw_blocks = doc["C_blocks"]
    if len(raw_blocks) != n_nodes:
        raise ModelError("C_blocks must list one block per node")
    c_blocks = []
    for i, (raw, nx_i, ny_i) in enumerate(zip(raw_blocks, part_x, part_y)):
        flat = np.asarray(raw, dtype=float)
        if flat.shape != (nx_i * ny_i,):
            raise ModelError(f"C block {i + 1} must hold {ny_i}x{nx_i} row-major numbers")
        c_blocks.append(flat.reshape(ny_i, nx_i))

    texts = doc["f"]
    if len(texts) != n_x:
        raise ModelError("f must list one expression per state")
    try:
        f = tuple(ex.parse(t, n_x) for t in texts)
    except ex.ExprSyntaxError as err:
        raise ModelError(f"bad nonlinearity expression: {err}") from err

    lo = np.asarray(doc["box_lo"], dtype=float)
    hi = np.asarray(doc["box_hi"], dtype=float)
    if lo.shape != (n_x,) or hi.shape != (n_x,):
        raise ModelError("box_lo/box_hi must list one bound per state")
    if np.any(lo > hi):
        bad = int(np.argmax(lo > hi)) + 1
        raise ModelError(f"state box {bad} is empty ({lo[bad - 1]} > {hi[bad - 1]})")
    box = tuple(Interval(float(l), float(h)) for l, h in zip(lo, hi))

    u_ss = np.asarray(doc["u_ss"], dtype=float)
    logistic = doc["logistic"]
    sensors = SensorConfig(
        weights=np.asarray(doc["weights_c"], dtype=float),
        k_min=int(logistic.get("k_min", 0)),
        k_max=int(logistic["k_max"]) if logistic.get("k_max") is not None else None,
        force_on=frozenset(int(i) for i in logistic.get("force_on", [])),
        force_off=frozenset(int(i) for i in logistic.get("force_off", [])),
    )
    return NdsModel(
        a=a,
        b=b,
        c_blocks=tuple(c_blocks),
        f=f,
        box=box,
        partition_x=part_x,
        partition_u=part_u,
        partition_y=part_y,
        u_ss=u_ss,
        sensors=sensors,
    )


def model_to_dict(m: NdsModel) -> dict:
    return {
        "n_x": m.n_x,
        "n_u": m.n_u,
        "N": m.n_nodes,
        "partition_x": list(m.partition_x),
        "partition_u": list(m.partition_u),
        "partition_y": list(m.partition_y),
        "A": m.a.flatten().tolist(),
        "B": m.b.flatten().tolist(),
        "C_blocks": [blk.flatten().tolist() for blk in m.c_blocks],
        "f": [ex.unparse(e) for e in m.f],
        "box_lo": m.box_lo().tolist(),
        "box_hi": m.box_hi().tolist(),
        "u_ss": m.u_ss.tolist(),
        "weights_c": m.sensors.weights.tolist(),
        "logistic": {
            "k_min": m.sensors.k_min,
            "k_max": m.sensors.k_max,
            "force_on": sorted(m.sensors.force_on),
            "force_off": sorted(m.sensors.force_off),
        },
    }


def load_model(path: str | Path) -> NdsModel:
    """Load and validate a model file."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as err:
        raise ModelError(f"cannot read model file {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ModelError(f"model file {path} is not valid JSON: {err}") from err
    if not isinstance(doc, dict):
        raise ModelError("model file must hold a JSON object")
    return model_from_dict(doc)


def save_model(m: NdsModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(m), indent=2) + "\n")
