"""Coupled plant/observer simulation and post-hoc certificate checks.

The observer is the standard one-gain corrector: the estimate integrates
the model plus L times the output innovation, with only the selected
sensors' rows reaching the innovation.  The error e = x - xhat then obeys
e' = (A - L*Gamma*C) e - (f(x) - f(xhat)), which is also integrated
directly as a consistency check: both runs use the same fixed-step
fourth-order scheme on the same grid, and since Runge-Kutta methods
commute with linear changes of state variables the two error trajectories
agree to rounding error.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .model import NdsModel, expand_gamma

__all__ = [
    "ObserverGain",
    "Trajectory",
    "SimulationError",
    "default_step",
    "simulate_coupled",
    "simulate_error",
    "check_certificate",
    "lyapunov_values",
    "write_trace_csv",
]


class SimulationError(Exception):
    pass


@dataclass(frozen=True)
class ObserverGain:
    """A gain with its placement: columns owned by unselected sensors must
    be exactly zero."""

    gain: np.ndarray
    gamma: np.ndarray
    residual: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "gain", np.asarray(self.gain, dtype=float))
        object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=float))

    def validate(self, model: NdsModel) -> None:
        if self.gain.shape != (model.n_x, model.n_y):
            raise SimulationError(
                f"gain must be {model.n_x}x{model.n_y}, got {self.gain.shape}"
            )
        selection = expand_gamma([int(round(g)) for g in self.gamma], model.partition_y).matrix
        masked = self.gain @ (np.eye(model.n_y) - selection)
        if np.any(np.abs(masked) > 0):
            bad = int(np.argmax(np.any(np.abs(masked) > 0, axis=0)))
            raise SimulationError(
                f"gain column {bad + 1} belongs to an unselected sensor but is nonzero"
            )


@dataclass(frozen=True)
class Trajectory:
    kind: str  # plant | observer | error
    times: np.ndarray
    states: np.ndarray  # (len(times), n)

    def final(self) -> np.ndarray:
        return self.states[-1]


def default_step(model: NdsModel) -> float:
    """One percent of the fastest linear time constant, clamped to
    [1e-4, 0.5] seconds."""
    eigs = np.abs(np.linalg.eigvals(model.a))
    fastest = float(np.max(eigs)) if eigs.size else 0.0
    if fastest <= 0:
        return 0.5
    return float(min(0.5, max(1e-4, 0.01 / fastest)))


def _rk4(field: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray, t_final: float, h: float):
    steps = int(round(t_final / h))
    times = np.empty(steps + 1)
    states = np.empty((steps + 1, len(y0)))
    times[0] = 0.0
    states[0] = y0
    y = y0.astype(float)
    t = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            k1 = field(t, y)
            k2 = field(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = field(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = field(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
            if not np.all(np.isfinite(y)):
                raise SimulationError(f"state became nonfinite at t = {t:.6g}")
            times[k + 1] = t
            states[k + 1] = y
    return times, states


def _input_at(model: NdsModel, u_of_t) -> Callable[[float], np.ndarray]:
    if u_of_t is not None:
        return u_of_t
    u_ss = model.u_ss
    return lambda t: u_ss


def simulate_coupled(
    model: NdsModel,
    gain: np.ndarray,
    gamma: Sequence[int],
    x0: np.ndarray,
    xhat0: np.ndarray,
    t_final: float,
    h: float | None = None,
    u_of_t: Callable[[float], np.ndarray] | None = None,
) -> tuple[Trajectory, Trajectory]:
    """Integrate plant and observer together on one shared grid."""
    if h is None:
        h = default_step(model)
    if h <= 0 or t_final < h:
        raise SimulationError("need h > 0 and t_final >= h")
    n = model.n_x
    x0 = np.asarray(x0, dtype=float)
    xhat0 = np.asarray(xhat0, dtype=float)
    if x0.shape != (n,) or xhat0.shape != (n,):
        raise SimulationError("initial states must match the model dimension")
    ObserverGain(np.asarray(gain), np.asarray(gamma, dtype=float)).validate(model)
    f = model.f_vector()
    a, b = model.a, model.b
    sel_c = expand_gamma([int(g) for g in gamma], model.partition_y).matrix @ model.c
    l_eff = np.asarray(gain, dtype=float)
    u_at = _input_at(model, u_of_t)

    def field(t, y):
        x, xh = y[:n], y[n:]
        u = u_at(t)
        dx = a @ x + f(x) + b @ u
        innovation = sel_c @ x - sel_c @ xh
        dxh = a @ xh + f(xh) + b @ u + l_eff @ innovation
        return np.concatenate([dx, dxh])

    times, states = _rk4(field, np.concatenate([x0, xhat0]), t_final, h)
    plant = Trajectory("plant", times, states[:, :n])
    observer = Trajectory("observer", times, states[:, n:])
    return plant, observer


def simulate_error(
    model: NdsModel,
    gain: np.ndarray,
    gamma: Sequence[int],
    e0: np.ndarray,
    plant: Trajectory,
    h: float | None = None,
    u_of_t: Callable[[float], np.ndarray] | None = None,
) -> Trajectory:
    """Integrate the error dynamics e' = (A - L*Gamma*C) e - (f(x) - f(x-e)).

    The nonlinear difference needs the plant state, so the plant copy is
    re-integrated alongside the error from the supplied trajectory's
    initial condition and grid; integrating the pair with the same
    fixed-step scheme keeps this run consistent with the coupled one to
    rounding error (Runge-Kutta steps commute with the linear change of
    variables (x, xhat) -> (x, x - xhat)).
    """
    n = model.n_x
    e0 = np.asarray(e0, dtype=float)
    if e0.shape != (n,):
        raise SimulationError("initial error must match the model dimension")
    if len(plant.times) < 2:
        raise SimulationError("plant trajectory must cover at least one step")
    if h is None:
        h = float(plant.times[1] - plant.times[0])
    t_final = float(plant.times[-1])
    ObserverGain(np.asarray(gain), np.asarray(gamma, dtype=float)).validate(model)
    f = model.f_vector()
    a, b = model.a, model.b
    sel_c = expand_gamma([int(g) for g in gamma], model.partition_y).matrix @ model.c
    a_err = a - np.asarray(gain, dtype=float) @ sel_c
    u_at = _input_at(model, u_of_t)

    def field(t, y):
        x, e = y[:n], y[n:]
        u = u_at(t)
        dx = a @ x + f(x) + b @ u
        # with e = x - xhat the nonlinear difference enters with a plus;
        # the minus-sign convention corresponds to e = xhat - x
        de = a_err @ e + (f(x) - f(x - e))
        return np.concatenate([dx, de])

    times, states = _rk4(field, np.concatenate([plant.states[0], e0]), t_final, h)
    return Trajectory("error", times, states[:, n:])


def check_certificate(
    model: NdsModel,
    gain: np.ndarray,
    gamma: Sequence[int],
    p: np.ndarray,
    beta: float | None = None,
    kappa: float | None = None,
    lam: np.ndarray | None = None,
    jac_lo: np.ndarray | None = None,
    jac_hi: np.ndarray | None = None,
    w: np.ndarray | None = None,
) -> dict:
    """Rebuild the synthesis matrix inequality from solved values and
    report its top eigenvalue together with the smallest eigenvalue of P.

    The gain re-enters through Y = P @ L, and the output map carries the
    selection, so the reported residual certifies exactly the placement
    that was solved.
    """
    n = model.n_x
    p = np.asarray(p, dtype=float)
    l_mat = np.asarray(gain, dtype=float)
    sel_c = expand_gamma([int(g) for g in gamma], model.partition_y).matrix @ model.c
    y_eff = p @ l_mat
    gain_term = y_eff @ sel_c
    if kappa is not None:
        if beta is None:
            raise SimulationError("the Lipschitz certificate needs beta")
        block = np.zeros((2 * n, 2 * n))
        block[:n, :n] = (
            model.a.T @ p + p @ model.a - gain_term - gain_term.T
            + kappa * beta * beta * np.eye(n)
        )
        block[:n, n:] = p
        block[n:, :n] = p
        block[n:, n:] = -kappa * np.eye(n)
    elif lam is not None:
        from .misdp import bounded_jacobian_thetas

        if jac_lo is None or jac_hi is None or w is None:
            raise SimulationError("the bounded-Jacobian certificate needs the bounds and W")
        t1, t2, t3 = bounded_jacobian_thetas(np.asarray(lam), jac_lo, jac_hi)
        dim = n + n * n
        block = np.zeros((dim, dim))
        block[:n, :n] = model.a.T @ p + p @ model.a - gain_term - gain_term.T + t1
        bottom_left = np.asarray(w).T @ p + t2
        block[n:, :n] = bottom_left
        block[:n, n:] = bottom_left.T
        block[n:, n:] = t3
    else:
        raise SimulationError("supply kappa (Lipschitz) or lam (bounded Jacobian)")
    eig_block = np.linalg.eigvalsh(0.5 * (block + block.T))
    eig_p = np.linalg.eigvalsh(0.5 * (p + p.T))
    return {
        "lambda_max": float(eig_block[-1]),
        "lambda_min_p": float(eig_p[0]),
        "kappa": kappa,
        "marginal_kappa": bool(kappa is not None and kappa < 1e-8),
    }


def lyapunov_values(error: Trajectory, p: np.ndarray) -> np.ndarray:
    """V(e) = e' P e along an error trajectory."""
    return np.einsum("ti,ij,tj->t", error.states, p, error.states)


def write_trace_csv(path: str | Path, traj: Trajectory, prefix: str) -> None:
    """One row per grid point: t, then the state components."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"{prefix}{i + 1}" for i in range(traj.states.shape[1])])
        for t, row in zip(traj.times, traj.states):
            writer.writerow([f"{t:.10g}"] + [f"{v:.16g}" for v in row])
