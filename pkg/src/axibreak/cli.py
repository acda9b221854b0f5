"""Command-line front end.

Every subcommand writes its results plus ``run_manifest.json`` into the output
directory (``--out``, else ``$AXIBREAK_OUT``, else ``./out``).  Exit status is
0 on success, 1 when a solver fails and 2 on bad arguments.

``--config FILE`` reads ``key = value`` lines using the long flag names
(``rho = 2.5``, ``n-theta = 64``); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .critical import BracketError, critical_table, find_bstar, write_critical_csv
from .fields import ANGULAR_DERIVATIVE, RADIAL_DERIVATIVE, Params, PolarGrid, RadialGrid, fmt, write_state_csv
from .radial import ConvergenceError, landau_mu, solve_symmetric
from .reduced import default_seeds, landscape, reduced_minimize, write_landscape_csv, write_stationary_json
from .solver2d import FlowLog, Seed2D, TopologyError, minimize_2d, nodal_radius, phase_winding, residuals_2d
from .sweep import default_rho_grid, locate_bifurcation, sweep, write_plot_scripts, write_sweep_csv

log = logging.getLogger("axibreak")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="axibreak", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, radial_n=512, two_d=False):
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--config", default=None, help="key=value file with default flag values")
        p.add_argument("--n", type=int, default=radial_n, help="radial grid points")
        if two_d:
            p.add_argument("--n-theta", type=int, default=64, help="angular grid points (even)")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("solve-symmetric", help="axially symmetric state for winding m")
    common(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("landau", help="lowest linear eigenvalue (rho -> 0)")
    common(p)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--b", type=float, nargs="+", required=True)

    p = sub.add_parser("reduced", help="stationary points of the four-parameter ansatz")
    common(p)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--scan", type=int, default=0, help="landscape points per axis (0 = none)")

    p = sub.add_parser("solve-2d", help="full two-dimensional minimisation")
    common(p, radial_n=128, two_d=True)
    p.add_argument("--b", type=float, default=None, help="field (default: numerical b*(rho) on this grid)")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--seed", choices=["symmetric", "mixed"], default="mixed")
    p.add_argument("--m", type=int, default=1, help="winding for --seed symmetric")
    p.add_argument("--eps", type=float, default=0.05, help="m=0 admixture for --seed mixed")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-steps", type=int, default=200_000)

    p = sub.add_parser("critical-field", help="b*(rho) where m=0 and m=1 tie")
    common(p)
    p.add_argument("--rho", type=float, nargs="+", required=True)
    p.add_argument("--tol-b", type=float, default=1e-4)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("sweep", help="asymmetric branch along b*(rho)")
    common(p, radial_n=128, two_d=True)
    p.add_argument("--rho-min", type=float, default=0.5)
    p.add_argument("--rho-max", type=float, default=10.0)
    p.add_argument("--rho-step", type=float, default=None, help="uniform step (default: refined grid)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--tol-b", type=float, default=1e-9)
    p.add_argument("--jobs", type=int, default=1)
    return ap


def _config_args(path: str, parser: argparse.ArgumentParser, command: str) -> list[str]:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    flags = {opt for action in sub._actions for opt in action.option_strings}
    store_true = {
        opt for action in sub._actions if isinstance(action, argparse._StoreTrueAction) for opt in action.option_strings
    }
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if flag not in flags or flag == "--config":
            raise ValueError(f"{path}:{lineno}: unknown key {key!r} for {command}")
        if flag in store_true:
            if value.lower() in ("1", "true", "yes"):
                out.append(flag)
        else:
            out += [flag, *value.split()]
    return out


def _parse(argv):
    parser = _parser()
    # read --config before the full parse so it can supply required flags
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    config = pre.parse_known_args(argv)[0].config
    command = next((a for a in argv if a in COMMANDS), None)
    if config and command:
        try:
            extra = _config_args(config, parser, command)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        i = argv.index(command)
        # config values first so explicit flags override them
        argv = [*argv[:i], command, *extra, *argv[i + 1 :]]
    return parser, parser.parse_args(argv)


def _outdir(args) -> Path:
    out = Path(args.out or os.environ.get("AXIBREAK_OUT") or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _jsonable(obj):
    if isinstance(obj, float):
        return float(fmt(obj)) if np.isfinite(obj) else str(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _manifest(out: Path, args, argv, extra=None):
    inputs = {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose",)}
    data = {
        "command": args.command,
        "argv": list(argv),
        "inputs": inputs,
        "code_version": __version__,
        "discretization": {"angular": ANGULAR_DERIVATIVE, "radial": RADIAL_DERIVATIVE},
    }
    data.update(extra or {})
    _write_json(out / "run_manifest.json", data)


# --- subcommands --------------------------------------------------------


def _cmd_solve_symmetric(args, out):
    grid = RadialGrid(args.n)
    st = solve_symmetric(args.m, Params(args.b, args.rho), grid, tol=args.tol)
    st.write(out / f"symmetric_m{args.m}")
    print(f"m={st.m} b={fmt(args.b)} rho={fmt(args.rho)} mu={fmt(st.mu)} G={fmt(st.energy)}")
    return {"grid": {"n": args.n}, "tolerances": {"newton": args.tol}}


def _cmd_landau(args, out):
    grid = RadialGrid(args.n)
    rows = [(b, landau_mu(args.m, b, grid)) for b in args.b]
    with (out / "landau.csv").open("w") as fh:
        fh.write("m,b,mu\n")
        for b, mu in rows:
            fh.write(f"{args.m},{fmt(b)},{fmt(mu)}\n")
    _write_json(out / "landau.json", [{"m": args.m, "b": b, "mu": mu, "grid_n": args.n} for b, mu in rows])
    print(" ".join(f"mu(m={args.m}, b={fmt(b)})={fmt(mu)}" for b, mu in rows))
    return {"grid": {"n": args.n}}


def _cmd_reduced(args, out):
    p = Params(args.b, args.rho)
    points = reduced_minimize(p, default_seeds(p.rho))
    write_stationary_json(out / "stationary.json", points)
    if args.scan > 0:
        phis = np.linspace(0, np.pi / 2, args.scan)
        a_axis = np.linspace(-3, 3, args.scan)
        write_landscape_csv(out / "landscape.csv", landscape(p, phis, a_axis, a_axis))
    best = points[0]
    print(f"{len(points)} stationary points; lowest {best.kind} G={fmt(best.point.energy)}")
    return {"seeds": 16}


def _cmd_solve_2d(args, out):
    grid = PolarGrid(RadialGrid(args.n), args.n_theta)
    b = args.b if args.b is not None else find_bstar(args.rho, grid.radial, tol_b=1e-9)
    p = Params(b, args.rho)
    seed = Seed2D.symmetric(args.m) if args.seed == "symmetric" else Seed2D.mixed(args.eps)
    hist = FlowLog()
    try:
        state = minimize_2d(seed, p, grid, tol=args.tol, max_steps=args.max_steps, history=hist)
    finally:
        with (out / "convergence.csv").open("w") as fh:
            fh.write("step,G,res_schrodinger,res_ampere,step_size\n")
            for step, g, rs, ra, tau in hist.rows:
                fh.write(f"{step},{fmt(g)},{fmt(rs)},{fmt(ra)},{fmt(tau)}\n")
    write_state_csv(out / "state.csv", state)
    try:
        winding = phase_winding(state)
        r_node = nodal_radius(state) if abs(winding) == 1 else float("nan")
    except TopologyError:
        winding, r_node = None, float("nan")
    res = residuals_2d(state, p)
    summary = {"b": b, "rho": args.rho, "mu": state.mu, "G": state.energy, "residuals": list(res),
               "winding": winding, "r_node": r_node, "steps": len(hist.rows) - 1}
    _write_json(out / "summary.json", summary)
    print(f"G={fmt(state.energy)} mu={fmt(state.mu)} winding={winding} r_node={fmt(r_node)}")
    return {"grid": {"n": args.n, "n_theta": args.n_theta}, "tolerances": {"residual": args.tol}}


def _cmd_critical(args, out):
    rows = critical_table(args.rho, RadialGrid(args.n), args.tol_b, args.jobs)
    write_critical_csv(out / "critical.csv", rows)
    print(" ".join(f"rho={fmt(r.rho)}: bstar={fmt(r.bstar_numeric)} (fit {fmt(r.bstar_fit)})" for r in rows))
    return {"grid": {"n": args.n}, "tolerances": {"tol_b": args.tol_b}}


def _cmd_sweep(args, out):
    grid = PolarGrid(RadialGrid(args.n), args.n_theta)
    if args.rho_step:
        rhos = np.round(np.arange(args.rho_min, args.rho_max + 1e-9, args.rho_step), 10).tolist()
    else:
        rhos = [r for r in default_rho_grid() if args.rho_min - 1e-12 <= r <= args.rho_max + 1e-12]
    table = {row.rho: row.bstar_numeric for row in critical_table(rhos, grid.radial, args.tol_b, args.jobs)}
    rows = sweep(rhos, grid, tol=args.tol, bstar=table.__getitem__)
    write_sweep_csv(out / "sweep.csv", rows)
    write_plot_scripts(out, "sweep.csv")
    bif = locate_bifurcation(rows)
    _write_json(out / "bifurcation.json", {"found": bif.found, "rho_c": bif.rho_c, "bracket": list(bif.bracket)})
    failed = sum(not r.converged for r in rows)
    print(f"{len(rows)} rows ({failed} failed); onset rho_c={fmt(bif.rho_c)} bracket={bif.bracket}")
    return {"grid": {"n": args.n, "n_theta": args.n_theta},
            "tolerances": {"residual": args.tol, "tol_b": args.tol_b}}


COMMANDS = {
    "solve-symmetric": _cmd_solve_symmetric,
    "landau": _cmd_landau,
    "reduced": _cmd_reduced,
    "solve-2d": _cmd_solve_2d,
    "critical-field": _cmd_critical,
    "sweep": _cmd_sweep,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser, args = _parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = _outdir(args)
    try:
        extra = COMMANDS[args.command](args, out)
    except (ConvergenceError, BracketError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        _manifest(out, args, argv, {"status": "failed", "error": str(exc)})
        return 1
    except ValueError as exc:
        print(f"argument error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    _manifest(out, args, argv, {"status": "ok", **extra})
    return 0


def main():
    sys.exit(run())
