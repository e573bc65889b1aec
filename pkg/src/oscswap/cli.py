"""Command-line interface.

Exit codes: 0 ok, 1 validation failure, 2 input error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from math import pi, sqrt

import numpy as np

from . import __version__
from .hamiltonians import ParameterConsistencyError, check_detuning_conditions, solve_params, stark_shift_mismatch
from .hilbert import SystemDims
from .lindblad import SolverError
from .runner import ScenarioError, load_scenario, parse_quantity, run, validate
from .states import OscState, TruncationError

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
TWO_PI = 2 * pi


class InputError(ValueError):
    pass


def _freq(text: str, name: str) -> float:
    """Angular frequency from ``"60 MHz"``; a bare number is read as MHz."""
    text = str(text).strip()
    try:
        hz = float(text) * 1e6
    except ValueError:
        try:
            hz = parse_quantity(text, "freq", name)
        except ScenarioError as exc:
            raise InputError(str(exc)) from None
    return TWO_PI * hz


def _complex(text: str) -> complex:
    try:
        return complex(str(text).replace("i", "j"))
    except ValueError:
        raise InputError(f"cannot parse complex amplitude {text!r}") from None


def _state(text: str) -> OscState:
    try:
        return OscState.parse(text)
    except (ValueError, IndexError) as exc:
        raise InputError(f"bad state {text!r}: {exc}") from None


def _add_param_args(p: argparse.ArgumentParser, required: bool):
    unit = " (bare numbers are MHz; or e.g. '1.5 GHz')"
    p.add_argument("--ga", required=required, default=None if required else "60", help="g_a / 2pi" + unit)
    p.add_argument("--da", required=required, default=None if required else "1500", help="Delta_a / 2pi" + unit)
    p.add_argument("--d", required=required, default=None if required else "1250", help="Delta / 2pi" + unit)
    p.add_argument("--delta", required=required, default=None if required else "250", help="delta / 2pi" + unit)
    p.add_argument("--k", type=int, default=1, help="phase-matching index (>= 1)")


def _solve(args):
    return solve_params(
        _freq(args.ga, "--ga"), _freq(args.da, "--da"), _freq(args.d, "--d"), _freq(args.delta, "--delta"), args.k
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oscswap", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="store_true", help="print version and build metadata")
    sub = ap.add_subparsers(dest="command")

    sim = sub.add_parser("simulate", help="run a scenario (preset name or YAML file)")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--truncation", type=int, default=None)
    sim.add_argument("--output", default=None, help="CSV path")
    sim.add_argument("--plot", default=None, help="SVG path")
    sim.add_argument("--json", action="store_true", help="print the summary as JSON")

    par = sub.add_parser("params", help="parameter tools")
    psub = par.add_subparsers(dest="params_command")
    solve = psub.add_parser("solve", help="solve pulse amplitude and b-coupling")
    _add_param_args(solve, required=True)

    prot = sub.add_parser("protocol", help="ideal protocol tools")
    prsub = prot.add_subparsers(dest="protocol_command")
    prun = prsub.add_parser("run", help="ideal protocol with coupler measurement")
    prun.add_argument("--phi", default="coherent:1")
    prun.add_argument("--phibar", default="coherent:-1")
    prun.add_argument("--alpha", default=str(1 / sqrt(2)))
    prun.add_argument("--beta", default=str(1 / sqrt(2)))
    prun.add_argument("--n", type=int, default=15)
    _add_param_args(prun, required=False)
    sw = prsub.add_parser("swap-check", help="conditional SWAP gate on an encoded qubit pair")
    sw.add_argument("--phi", default="cat:1:+")
    sw.add_argument("--phibar", default="cat:1:-")
    sw.add_argument("--n", type=int, default=15)
    sw.add_argument("--tol", type=float, default=1e-6, help="worst-case infidelity allowed")
    _add_param_args(sw, required=False)

    val = sub.add_parser("validate", help="run a validation suite")
    val.add_argument("--suite", default="all")
    return ap


def _version() -> str:
    import scipy

    from . import kernels

    return f"oscswap {__version__} (kernels: {kernels.BACKEND}; numpy {np.__version__}; scipy {scipy.__version__})"


def _cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    res = run(sc, truncation=args.truncation, output=args.output, plot=args.plot)
    summary = res.summary()
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        for k, v in summary.items():
            print(f"{k:24s} {v:.10g}" if isinstance(v, float) else f"{k:24s} {v}")
    return EXIT_OK


def _cmd_params(args) -> int:
    if args.params_command != "solve":
        raise InputError("usage: oscswap params solve --ga ... --da ... --d ... --delta ... --k ...")
    sol = _solve(args)
    p = sol.physical
    rows = [
        ("g_a/2pi (MHz)", p.g_a / TWO_PI / 1e6),
        ("g_b/2pi (MHz)", p.g_b / TWO_PI / 1e6),
        ("Omega/2pi (MHz)", p.Omega / TWO_PI / 1e6),
        ("Delta_a/2pi (MHz)", p.Delta_a / TWO_PI / 1e6),
        ("Delta/2pi (MHz)", p.Delta / TWO_PI / 1e6),
        ("delta/2pi (MHz)", p.delta / TWO_PI / 1e6),
        ("g~_a/2pi (MHz)", p.g_tilde_a / TWO_PI / 1e6),
        ("lambda/2pi (MHz)", p.lam / TWO_PI / 1e6),
        ("omega/2pi (MHz)", sol.ideal.omega / TWO_PI / 1e6),
        ("t_swap (us)", sol.t_swap * 1e6),
        ("shift mismatch (rel)", stark_shift_mismatch(p)),
        ("phase residual (rad)", sol.ideal.phase_residual()),
    ]
    for name, v in rows:
        print(f"{name:24s} {v:.10g}")
    print("\nlarge-detuning conditions (large / small):")
    for name, _, _, ratio in check_detuning_conditions(p).rows():
        print(f"  {ratio:10.4g}  {name}")
    return EXIT_OK


def _cmd_protocol(args) -> int:
    from .metrics import entanglement_entropy
    from .protocol import run_protocol, swap_gate_check

    sol = _solve(args)
    dims = SystemDims(args.n, args.n)
    if args.protocol_command == "run":
        res = run_protocol(_state(args.phi), _state(args.phibar), _complex(args.alpha), _complex(args.beta), sol.ideal, dims)
        print(f"{'overlap with ideal':24s} {res.ideal_overlap:.12f}")
        for name, br in res.branches.items():
            s = entanglement_entropy(br.state, ["a"]) if br.probability > 0 else 0.0
            print(f"branch {name:3s} p={br.probability:.12f}  entropy(a)={s:.10f}")
        return EXIT_OK
    if args.protocol_command == "swap-check":
        rep = swap_gate_check(_state(args.phi), _state(args.phibar), sol.ideal, dims)
        for label, infid in rep.mappings:
            print(f"{label:36s} infidelity {infid:.3e}")
        ok = rep.worst_infidelity <= args.tol
        print(f"worst infidelity {rep.worst_infidelity:.3e} ({'ok' if ok else 'FAIL'} at tol {args.tol:.0e})")
        return EXIT_OK if ok else EXIT_VALIDATION
    raise InputError("usage: oscswap protocol {run,swap-check} ...")


def _cmd_validate(args) -> int:
    try:
        rep = validate(args.suite)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None
    print(rep.format())
    return EXIT_OK if rep.passed else EXIT_VALIDATION


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    if args.version:
        print(_version())
        return EXIT_OK
    handlers = {"simulate": _cmd_simulate, "params": _cmd_params, "protocol": _cmd_protocol, "validate": _cmd_validate}
    if args.command not in handlers:
        ap.print_help()
        return EXIT_INPUT
    try:
        return handlers[args.command](args)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ParameterConsistencyError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InputError, ScenarioError, TruncationError, ValueError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
