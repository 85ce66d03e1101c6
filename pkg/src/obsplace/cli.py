"""Command-line front end.

Four subcommands chain into a pipeline: ``parameterize`` certifies
nonlinearity constants, ``place`` solves the sensor placement, ``simulate``
runs the plant/observer pair, and ``traffic-demo`` composes all three on
the built-in highway network.  Every run writes a manifest with the
resolved flags and seeds; reruns with the same manifest inputs reproduce
identical numbers.

Exit codes: 0 ok, 1 I/O or usage, 2 infeasible, 3 numerical failure,
4 estimation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import classify as cl
from . import misdp, observer, sdp, traffic
from .model import ModelError, NdsModel, load_model, model_to_dict, save_model

EXIT_OK = 0
EXIT_IO = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3
EXIT_ESTIMATION = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2, which we reserve
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_IO)


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n")


def _manifest(path: Path, command: str, inputs: dict, flags: dict, t0: float) -> None:
    _write_json(
        path,
        {
            "command": command,
            "inputs": inputs,
            "flags": flags,
            "version": __version__,
            "wall_time_s": round(time.monotonic() - t0, 3),
        },
    )


def _load_model_or_die(path: str) -> NdsModel:
    try:
        return load_model(path)
    except ModelError as err:
        raise CliError(str(err), EXIT_IO) from err


def _estimator_settings(args) -> cl.EstimatorSettings:
    return cl.EstimatorSettings(
        samples=args.samples,
        kind=args.sequence,
        seed=args.seed,
        eps_h=args.eps_h,
        eps_x=args.eps_x,
        max_boxes=args.max_boxes,
    )


# ---------------------------------------------------------------------------
# parameterize
# ---------------------------------------------------------------------------


def cmd_parameterize(args) -> int:
    t0 = time.monotonic()
    model = _load_model_or_die(args.model)
    settings = _estimator_settings(args)
    try:
        if args.nonlinearity_class == "lipschitz":
            analytic_rows = json.loads(args.analytic_rows) if args.analytic_rows else None
            result = cl.lipschitz_rowwise(
                model, method=args.method, settings=settings, analytic_rows=analytic_rows
            )
            params = result.params()
        elif args.nonlinearity_class == "bounded-jacobian":
            lo, hi = cl.jacobian_bounds(model, method=args.method, settings=settings)
            params = cl.NonlinearityParams(
                class_tag="BoundedJacobian",
                method=args.method,
                certificate=args.method == "interval",
                jac_lo=lo,
                jac_hi=hi,
            )
        elif args.nonlinearity_class == "one-sided-lipschitz":
            params = cl.osl_constant(model, settings=settings)
        elif args.nonlinearity_class == "qib":
            params = cl.qib_constants(model, settings=settings)
        else:  # pragma: no cover - argparse restricts choices
            raise CliError(f"unknown class {args.nonlinearity_class}", EXIT_IO)
    except (cl.ClassifyError, Exception) as err:
        if isinstance(err, CliError):
            raise
        print(f"estimation failed: {err}", file=sys.stderr)
        return EXIT_ESTIMATION
    out = Path(args.output)
    _write_json(out, cl.params_to_dict(params))
    _manifest(
        out.with_suffix(".manifest.json"),
        "parameterize",
        {"model": str(args.model)},
        {
            "class": args.nonlinearity_class,
            "method": args.method,
            "samples": args.samples,
            "sequence": args.sequence,
            "seed": args.seed,
            "eps_h": args.eps_h,
            "eps_x": args.eps_x,
            "max_boxes": args.max_boxes,
        },
        t0,
    )
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# place
# ---------------------------------------------------------------------------


def placement_to_dict(result: misdp.PlacementResult, variant: str, w_note: str | None) -> dict:
    return {
        "variant": variant,
        "gamma": [int(round(v)) for v in result.gamma],
        "objective": result.objective,
        "gain": result.gain.tolist(),
        "p": result.p.tolist(),
        "y": result.y.tolist(),
        "q": result.q.tolist(),
        "kappa": result.kappa,
        "lam": result.lam.tolist() if result.lam is not None else None,
        "residual": result.residual,
        "marginal": result.marginal,
        "kappa_below_1e-8": result.kappa_flag,
        "p_condition": result.p_condition,
        "w_provenance": w_note,
        "stats": {
            "nodes": result.stats["nodes"],
            "sdp_solves": result.stats["sdp_solves"],
            "wall_time_s": round(result.stats["wall_time"], 3),
            "node_limit_hit": result.stats["node_limit_hit"],
            "node_log": [
                {"id": nid, "parent": parent, "bound": bound, "status": status}
                for nid, parent, bound, status in result.stats["node_log"]
            ],
        },
    }


def _params_from_file(path: str) -> cl.NonlinearityParams:
    try:
        doc = json.loads(Path(path).read_text())
        return cl.params_from_dict(doc)
    except (OSError, json.JSONDecodeError, cl.ClassifyError) as err:
        raise CliError(f"cannot read parameter report {path}: {err}", EXIT_IO) from err


def cmd_place(args) -> int:
    t0 = time.monotonic()
    model = _load_model_or_die(args.model)
    params = _params_from_file(args.params)
    w = None
    w_note = None
    if args.variant == "bounded-jacobian":
        if not args.w:
            raise CliError("--variant bounded-jacobian needs --w (JSON matrix file)", EXIT_IO)
        try:
            w = np.asarray(json.loads(Path(args.w).read_text()), dtype=float)
        except (OSError, json.JSONDecodeError, ValueError) as err:
            raise CliError(f"cannot read W from {args.w}: {err}", EXIT_IO) from err
        w_note = f"user-supplied from {args.w}"
    n, ny = model.n_x, model.n_y
    bound = args.ybound
    try:
        placement = misdp.PlacementProblem(
            model=model,
            params=params,
            variant=args.variant,
            y_lo=-bound * np.ones((n, ny)),
            y_hi=bound * np.ones((n, ny)),
            w=w,
            options=sdp.SolverOptions(
                feas_tol=args.feas_tol,
                gap_tol=args.gap_tol,
                infeas_margin=args.infeas_margin,
                max_newton=args.max_newton,
            ),
            node_limit=args.node_limit,
        )
    except misdp.MisdpError as err:
        raise CliError(str(err), EXIT_IO) from err
    if args.dump_sdp:
        assembled = (
            misdp.assemble_p4(placement, eliminate_y=False)
            if args.variant == "lipschitz"
            else misdp.assemble_bounded_jacobian(placement, eliminate_y=False)
        )
        _write_json(Path(args.dump_sdp), sdp.problem_to_dict(assembled.problem))
    try:
        result = misdp.branch_and_bound(placement)
    except misdp.MisdpError as err:
        if "infeasible" in str(err).lower():
            print(f"infeasible: {err}", file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = Path(args.output)
    _write_json(out, placement_to_dict(result, args.variant, w_note))
    _manifest(
        out.with_suffix(".manifest.json"),
        "place",
        {"model": str(args.model), "params": str(args.params)},
        {
            "variant": args.variant,
            "ybound": args.ybound,
            "feas_tol": args.feas_tol,
            "gap_tol": args.gap_tol,
            "infeas_margin": args.infeas_margin,
            "max_newton": args.max_newton,
            "node_limit": args.node_limit,
        },
        t0,
    )
    print(f"wrote {out} (selected {result.selected()}, objective {result.objective})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    t0 = time.monotonic()
    model = _load_model_or_die(args.model)
    try:
        doc = json.loads(Path(args.placement).read_text())
        gamma = np.asarray(doc["gamma"], dtype=int)
        gain = np.asarray(doc["gain"], dtype=float)
        p_mat = np.asarray(doc["p"], dtype=float)
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as err:
        raise CliError(f"cannot read placement {args.placement}: {err}", EXIT_IO) from err
    try:
        observer.ObserverGain(gain, gamma).validate(model)
    except observer.SimulationError as err:
        raise CliError(str(err), EXIT_IO) from err

    rng = np.random.default_rng(args.x0_seed)
    lo, hi = model.box_lo(), model.box_hi()
    x0 = lo + rng.random(model.n_x) * (hi - lo)
    if args.xhat0 == "zero":
        xhat0 = np.zeros(model.n_x)
    else:
        xhat0 = lo + rng.random(model.n_x) * (hi - lo)
    try:
        plant, obs_traj = observer.simulate_coupled(
            model, gain, gamma, x0, xhat0, t_final=args.t_final, h=args.step
        )
    except observer.SimulationError as err:
        print(f"simulation failed: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    err_states = plant.states - obs_traj.states
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    observer.write_trace_csv(out_dir / "plant.csv", plant, "x")
    observer.write_trace_csv(out_dir / "observer.csv", obs_traj, "xhat")
    err_traj = observer.Trajectory("error", plant.times, err_states)
    observer.write_trace_csv(out_dir / "error.csv", err_traj, "e")
    n0 = float(np.linalg.norm(err_states[0]))
    n_final = float(np.linalg.norm(err_states[-1]))
    half = err_states[len(err_states) // 2]
    summary = {
        "t_final": float(plant.times[-1]),
        "step": float(plant.times[1] - plant.times[0]),
        "initial_error_norm": n0,
        "final_error_norm": n_final,
        "final_relative_error": n_final / n0 if n0 > 0 else 0.0,
        "decay_estimate_per_s": (
            float(np.log(np.linalg.norm(half) / n_final) / (plant.times[-1] / 2))
            if n_final > 0 and np.linalg.norm(half) > 0
            else None
        ),
        "box_exit": float(np.max(np.maximum(plant.states - hi, lo[None, :] - plant.states))),
        "x0_seed": args.x0_seed,
    }
    _write_json(out_dir / "summary.json", summary)
    _manifest(
        out_dir / "simulate.manifest.json",
        "simulate",
        {"model": str(args.model), "placement": str(args.placement)},
        {
            "t_final": args.t_final,
            "step": args.step,
            "x0_seed": args.x0_seed,
            "xhat0": args.xhat0,
        },
        t0,
    )
    print(f"wrote traces to {out_dir} (final relative error {summary['final_relative_error']:.3e})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# traffic demo
# ---------------------------------------------------------------------------


def cmd_traffic_demo(args) -> int:
    t0 = time.monotonic()
    cfg = (
        traffic.paper_experiment_config()
        if args.scale == "paper"
        else traffic.small_experiment_config()
    )
    model = traffic.build_traffic_model(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = out_dir / "model.json"
    save_model(model, model_path)
    _write_json(out_dir / "model.metadata.json", traffic.reconstruction_metadata(cfg))

    settings = cl.EstimatorSettings(samples=args.samples, kind=args.sequence, seed=args.seed)
    analytic_rows = traffic.analytic_row_bounds(cfg)
    if args.method == "analytic":
        result = cl.lipschitz_rowwise(
            model, method="analytic-input", analytic_rows=analytic_rows.tolist()
        )
    else:
        result = cl.lipschitz_rowwise(model, method=args.method, settings=settings)
    params = result.params()
    params.diagnostics["analytic_row_bounds"] = analytic_rows.tolist()
    _write_json(out_dir / "params.json", cl.params_to_dict(params))

    placement_problem = misdp.PlacementProblem(
        model=model,
        params=params,
        variant="lipschitz",
        y_lo=-args.ybound * np.ones((model.n_x, model.n_y)),
        y_hi=args.ybound * np.ones((model.n_x, model.n_y)),
    )
    try:
        result_p = misdp.branch_and_bound(placement_problem)
    except misdp.MisdpError as err:
        if "infeasible" in str(err).lower():
            print(f"infeasible: {err}", file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    doc = placement_to_dict(result_p, "lipschitz", None)
    doc["selected_elements"] = [
        traffic.physical_element(cfg, i) for i in result_p.selected()
    ]
    _write_json(out_dir / "placement.json", doc)

    rng = np.random.default_rng(args.x0_seed)
    x0 = rng.uniform(0.0, cfg.critical_density, model.n_x)
    xhat0 = np.zeros(model.n_x)
    try:
        plant, obs_traj = observer.simulate_coupled(
            model,
            result_p.gain,
            [int(v) for v in result_p.gamma],
            x0,
            xhat0,
            t_final=args.t_final,
            h=args.step,
        )
    except observer.SimulationError as err:
        print(f"simulation failed: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    err_states = plant.states - obs_traj.states
    observer.write_trace_csv(out_dir / "plant.csv", plant, "x")
    observer.write_trace_csv(out_dir / "observer.csv", obs_traj, "xhat")
    observer.write_trace_csv(
        out_dir / "error.csv", observer.Trajectory("error", plant.times, err_states), "e"
    )
    cert = observer.check_certificate(
        model,
        result_p.gain,
        [int(v) for v in result_p.gamma],
        result_p.p,
        beta=params.beta,
        kappa=result_p.kappa,
    )
    n0 = float(np.linalg.norm(err_states[0]))
    summary = {
        "beta": params.beta,
        "beta_method": params.method,
        "gamma": [int(v) for v in result_p.gamma],
        "selected_elements": doc["selected_elements"],
        "certificate": cert,
        "final_relative_error": float(np.linalg.norm(err_states[-1])) / n0,
        "t_final": args.t_final,
        "box_exit": float(np.max(plant.states) - cfg.critical_density),
    }
    _write_json(out_dir / "summary.json", summary)
    _manifest(
        out_dir / "demo.manifest.json",
        "traffic-demo",
        {},
        {
            "scale": args.scale,
            "method": args.method,
            "samples": args.samples,
            "sequence": args.sequence,
            "seed": args.seed,
            "x0_seed": args.x0_seed,
            "t_final": args.t_final,
            "step": args.step,
            "ybound": args.ybound,
        },
        t0,
    )
    print(
        f"demo complete: placed {int(result_p.gamma.sum())} sensor(s) at "
        f"{doc['selected_elements']}, final relative error "
        f"{summary['final_relative_error']:.3e}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="obsplace", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parameterize", help="certify nonlinearity constants")
    p.add_argument("model")
    p.add_argument("--class", dest="nonlinearity_class", required=True,
                   choices=["lipschitz", "bounded-jacobian", "one-sided-lipschitz", "qib"])
    p.add_argument("--method", default="interval", choices=["lds", "interval", "analytic-input"])
    p.add_argument("--samples", type=int, default=2**14)
    p.add_argument("--sequence", default="halton", choices=["halton", "sobol", "random"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps-h", type=float, default=1e-4)
    p.add_argument("--eps-x", type=float, default=None)
    p.add_argument("--max-boxes", type=int, default=100_000)
    p.add_argument("--analytic-rows", default=None,
                   help="JSON list of per-row constants for --method analytic-input")
    p.add_argument("-o", "--output", default="params.json")
    p.set_defaults(func=cmd_parameterize)

    p = sub.add_parser("place", help="solve the sensor placement")
    p.add_argument("model")
    p.add_argument("params")
    p.add_argument("--variant", default="lipschitz", choices=["lipschitz", "bounded-jacobian"])
    p.add_argument("--ybound", type=float, default=misdp.DEFAULT_Y_BOUND)
    p.add_argument("--w", default=None, help="JSON matrix for the bounded-jacobian variant")
    p.add_argument("--feas-tol", type=float, default=1e-7)
    p.add_argument("--gap-tol", type=float, default=1e-6)
    p.add_argument("--infeas-margin", type=float, default=1e-6)
    p.add_argument("--max-newton", type=int, default=400)
    p.add_argument("--node-limit", type=int, default=10_000)
    p.add_argument("--dump-sdp", default=None, help="dump the assembled problem as JSON")
    p.add_argument("-o", "--output", default="placement.json")
    p.set_defaults(func=cmd_place)

    p = sub.add_parser("simulate", help="run the plant/observer pair")
    p.add_argument("model")
    p.add_argument("placement")
    p.add_argument("--t-final", type=float, default=600.0)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--x0-seed", type=int, default=0)
    p.add_argument("--xhat0", default="zero", choices=["zero", "random"])
    p.add_argument("--out-dir", default="simulation")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("traffic-demo", help="end-to-end highway example")
    p.add_argument("--scale", default="paper", choices=["paper", "small"])
    p.add_argument("--method", default="analytic", choices=["analytic", "interval", "lds"])
    p.add_argument("--samples", type=int, default=2**14)
    p.add_argument("--sequence", default="halton", choices=["halton", "sobol", "random"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--x0-seed", type=int, default=0)
    p.add_argument("--t-final", type=float, default=600.0)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--ybound", type=float, default=misdp.DEFAULT_Y_BOUND)
    p.add_argument("--out-dir", default="traffic-demo")
    p.set_defaults(func=cmd_traffic_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
