"""Command line front end.

Every command writes its data files plus a JSON manifest holding the full
argument set, so ``lle-tpa rerun MANIFEST`` reproduces the outputs byte for
byte.  Errors are reported on stderr as one JSON object and mapped to exit
codes (2 for invalid input).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import DomainError, LLEError
from .outputs import dumps_json, read_rows, write_json, write_rows

OUT_DIR_ENV = "LLE_TPA_OUT_DIR"
TABLE1_F = (1.1, 1.6, 2.0, 4.0, 10.0, 20.0)


class UsageError(DomainError):
    """Invalid command line input."""


# validation ---------------------------------------------------------------
def _require(cond, message):
    if not cond:
        raise UsageError(message)


def _validate(args):
    _require(0 < args.tol <= 1e-2, "--tol must lie in (0, 1e-2]")
    _require(args.jobs >= 1, "--jobs must be >= 1")
    if args.modes is not None:
        _require(args.modes >= 8, "--modes must be >= 8")
    if getattr(args, "d", None) is not None:
        _require(args.d != 0, "--d must be nonzero")
    if getattr(args, "f", None) is not None and args.command != "critical-kappa":
        _require(args.f != 0, "--f must be nonzero")
    if getattr(args, "kappa", None) is not None and not isinstance(args.kappa, list):
        _require(args.kappa >= 0, "--kappa must be >= 0")
    if args.command == "critical-kappa":
        _require(args.f != 0, "--f must be nonzero")
        _require(not args.numeric or args.d is not None, "--numeric needs --d")
    if args.command in ("kappa-num",):
        _require(args.f * args.f > 1, "the numerical threshold needs f^2 > 1")
    if args.command == "evolve":
        _require(args.dt > 0, "--dt must be positive")
        _require(args.tmax >= 0, "--tmax must be nonnegative")
        _parse_init(args.init)
    if args.command == "soliton":
        _require(args.d > 0, "solitons need anomalous dispersion --d > 0")
        _require(args.zeta_tilde > 0, "--zeta-tilde must be positive")
        _require(args.eps >= 0, "--eps must be nonnegative")
    if args.command == "continue":
        _require(args.ds > 0, "--ds must be positive")
        _require(args.max_steps >= 1, "--max-steps must be >= 1")
        _require(args.candidate_index >= 0, "--candidate-index must be >= 0")


def _parse_init(tokens):
    head = tokens[0]
    if head == "constant" and len(tokens) == 1:
        return ("constant", None)
    if head.startswith("random:") and len(tokens) == 1:
        try:
            return ("random", int(head.split(":", 1)[1]))
        except ValueError:
            raise UsageError("--init random:SEED needs an integer seed") from None
    if head == "file" and len(tokens) == 2:
        return ("file", tokens[1])
    if head.startswith("file:") and len(tokens) == 1:
        return ("file", head.split(":", 1)[1])
    raise UsageError("--init must be 'constant', 'random:SEED' or 'file PATH'")


# helpers ---------------------------------------------------------------
def _out_path(args, default_name):
    name = args.out or default_name
    path = Path(name)
    if not path.is_absolute():
        path = Path(args.out_dir) / path
    return path


def _manifest(args, outputs, results=None):
    params = {
        k: v for k, v in sorted(vars(args).items()) if k != "func"
    }
    return {
        "command": args.command,
        "arguments": params,
        "outputs": [str(p) for p in outputs],
        "results": results or {},
        "versions": {
            "lle_tpa": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }


def _write_manifest(args, outputs, results=None):
    main_out = Path(outputs[0]) if outputs else Path(args.out_dir) / args.command
    path = main_out.with_name(main_out.name + ".manifest.json")
    write_json(path, _manifest(args, outputs, results))
    return path


def _params(args, zeta=0.0):
    from .model import Params

    return Params(args.d, zeta, args.f, args.kappa)


def _print(value, precision):
    print(f"{value:.{precision}f}")


# commands ---------------------------------------------------------------
def cmd_trivial_branch(args):
    from .trivial_branch import sample_branch, write_branch_csv

    points = sample_branch(_params(args), n=args.n)
    out = _out_path(args, "trivial_branch.csv")
    write_branch_csv(points, out)
    _write_manifest(args, [out], {"n_points": len(points)})
    return 0


def cmd_detect_bifurcations(args):
    from .bifurcation import scan_trivial_branch, write_candidates_csv

    cands = scan_trivial_branch(_params(args))
    out = _out_path(args, "candidates.csv")
    write_candidates_csv(cands, out)
    _write_manifest(args, [out], {"n_candidates": len(cands)})
    print(len(cands))
    return 0


def cmd_critical_kappa(args):
    from .bifurcation import kappa_star_bifurcation
    from .continuation import kappa_num_threshold

    if args.numeric:
        value = kappa_num_threshold(args.d, args.f)
    else:
        value = kappa_star_bifurcation(args.f)
    _print(value, args.precision)
    if args.out:
        out = _out_path(args, "")
        write_rows(out, ("f", "kappa"), [(args.f, value)])
        _write_manifest(args, [out], {"kappa": value})
    return 0


def cmd_nonexistence_kappa(args):
    from .bifurcation import kappa_star_nonexistence

    value = kappa_star_nonexistence(args.d, args.f)
    print(f"{value:.{args.precision}g}")
    if args.out:
        out = _out_path(args, "")
        write_rows(out, ("d", "f", "kappa"), [(args.d, args.f, value)])
        _write_manifest(args, [out], {"kappa": value})
    return 0


def cmd_kappa_num(args):
    from .continuation import kappa_num_threshold

    value = kappa_num_threshold(args.d, args.f)
    _print(value, args.precision)
    if args.out:
        out = _out_path(args, "")
        write_rows(out, ("d", "f", "kappa_num"), [(args.d, args.f, value)])
        _write_manifest(args, [out], {"kappa_num": value})
    return 0


def _table_row(d, f):
    from .bifurcation import kappa_star_bifurcation
    from .continuation import kappa_num_threshold

    return (f, kappa_star_bifurcation(f), kappa_num_threshold(d, f))


def cmd_table1(args):
    fs = list(TABLE1_F)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_table_row, [args.d] * len(fs), fs))
    else:
        rows = [_table_row(args.d, f) for f in fs]
    out = _out_path(args, "table1.csv")
    write_rows(out, ("f", "kappa_star", "kappa_num"), rows)
    _write_manifest(args, [out])
    for row in rows:
        print(f"{row[0]:g}\t{row[1]:.3f}\t{row[2]:.3f}")
    return 0


def cmd_continue(args):
    from .bifurcation import scan_trivial_branch
    from .continuation import continue_from_candidate

    params = _params(args)
    cands = scan_trivial_branch(params)
    if args.candidate_index >= len(cands):
        raise UsageError(
            f"--candidate-index {args.candidate_index} out of range ({len(cands)} candidates)"
        )
    c = cands[args.candidate_index]
    branch = continue_from_candidate(
        c,
        params,
        n_modes=args.modes or 128,
        ds=args.ds,
        max_steps=args.max_steps,
    )
    out = _out_path(args, "branch.csv")
    rows = [
        (i, p.zeta, p.kappa, p.l2, p.linf, p.newton_residual)
        for i, p in enumerate(branch.points)
    ]
    write_rows(out, ("step", "zeta", "kappa", "l2", "linf", "residual"), rows)
    origin = {
        "t": c.t,
        "k": c.k,
        "zeta": c.zeta,
        "re_a0": c.a0.real,
        "im_a0": c.a0.imag,
        "branch_sign": c.branch_sign,
        "transversality": c.transversality,
    }
    side = out.with_suffix(".json")
    write_json(
        side,
        {
            "origin": origin,
            "closed": branch.closed,
            "stop_reason": branch.stop_reason,
            "n_points": len(branch.points),
        },
    )
    _write_manifest(args, [out, side], {"closed": branch.closed})
    print("closed" if branch.closed else branch.stop_reason)
    return 0


def _initial_state(args, params, n_modes):
    from .dynamics import random_initial_state
    from .model import FieldState
    from .trivial_branch import constant_states_at

    kind, arg = _parse_init(args.init)
    if kind == "constant":
        return FieldState.constant(constant_states_at(params.zeta, params)[0], n_modes)
    if kind == "random":
        return random_initial_state(n_modes, seed=arg)
    rows = read_rows(arg)
    if not rows:
        raise UsageError(f"{arg} holds no samples")
    keys = ("re_a", "im_a") if "re_a" in rows[0] else ("re", "im")
    values = np.array([r[keys[0]] + 1j * r[keys[1]] for r in rows])
    return FieldState(values)


def cmd_evolve(args):
    from .dynamics import evolve, write_series_csv

    params = _params(args, zeta=args.zeta)
    u0 = _initial_state(args, params, args.modes or 128)
    u, diag = evolve(u0, params, dt=args.dt, t_max=args.tmax)
    out = _out_path(args, "series.csv")
    write_series_csv(diag, out, stride=args.stride)
    results = {
        "converged": diag.converged,
        "spatially_constant": diag.spatially_constant,
        "mean_residual": diag.mean_residual,
        "final_h1x": float(diag.h1x[-1]),
        "l2_ceiling": diag.l2_ceiling,
        "lemma41_ok": diag.lemma41_ok,
    }
    _write_manifest(args, [out], results)
    print("converged" if diag.converged else "not converged")
    return 0


def cmd_soliton(args):
    from .soliton import (
        RescaledParams,
        rescale_to_periodic,
        staged_continue,
        write_periodic_csv,
        write_profile_csv,
    )

    rp = RescaledParams(args.d, args.zeta_tilde, args.f_tilde, args.eps, args.kappa)
    u = staged_continue(rp, n_modes=args.modes or 512, kind=args.kind)
    out = _out_path(args, "profile.csv")
    write_profile_csv(u, out)
    outputs = [out]
    results = {"peak": u.peak(), "re_u_infty": u.u_infty.real, "im_u_infty": u.u_infty.imag}
    if args.eps > 0:
        a, params = rescale_to_periodic(u, rp, args.torus_modes, tol=args.tol)
        periodic = out.with_name(out.stem + "_periodic.csv")
        write_periodic_csv(a, params, periodic)
        outputs.append(periodic)
        results.update({"zeta": params.zeta, "f": params.f, "torus_linf": a.linf()})
    _write_manifest(args, outputs, results)
    return 0


def cmd_rerun(args):
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    saved = manifest["arguments"]
    argv = _argv_from_arguments(manifest["command"], saved)
    return main(argv)


def _argv_from_arguments(command, saved):
    parser = build_parser()
    sub = parser._subparsers._group_actions[0].choices[command]
    argv = [command]
    for action in sub._actions:
        if not action.option_strings or action.dest == "help":
            continue
        if action.dest not in saved:
            continue
        value = saved[action.dest]
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(flag)
        elif value is None:
            continue
        elif isinstance(value, list):
            argv += [flag, *map(str, value)]
        else:
            argv += [flag, repr(value) if isinstance(value, float) else str(value)]
    return argv


# parser ---------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=1e-10, help="Newton tolerance")
    common.add_argument("--modes", type=int, default=None, help="grid modes N")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers")
    common.add_argument(
        "--out-dir",
        default=os.environ.get(OUT_DIR_ENV, "."),
        help=f"output directory (default ${OUT_DIR_ENV} or .)",
    )

    parser = argparse.ArgumentParser(prog="lle-tpa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("trivial-branch", cmd_trivial_branch, "sample the curve of constant solutions")
    p.add_argument("--d", type=float, default=0.1)
    p.add_argument("--f", type=float, required=True)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--n", type=int, default=2001)
    p.add_argument("--out")

    p = add("detect-bifurcations", cmd_detect_bifurcations, "bifurcation points on the trivial curve")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--f", type=float, required=True)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--out")

    p = add("critical-kappa", cmd_critical_kappa, "damping above which bifurcations vanish")
    p.add_argument("--f", type=float, required=True)
    p.add_argument("--numeric", action="store_true", help="use the numerical threshold")
    p.add_argument("--d", type=float, default=None)
    p.add_argument("--precision", type=int, default=3)
    p.add_argument("--out")

    p = add("nonexistence-kappa", cmd_nonexistence_kappa, "damping above which only constants exist")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--f", type=float, required=True)
    p.add_argument("--precision", type=int, default=6, help="significant digits")
    p.add_argument("--out")

    p = add("kappa-num", cmd_kappa_num, "numerical threshold from the bifurcation scan")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--f", type=float, required=True)
    p.add_argument("--precision", type=int, default=3)
    p.add_argument("--out")

    p = add("table1", cmd_table1, "both threshold columns for the standard forcing values")
    p.add_argument("--d", type=float, default=0.1)
    p.add_argument("--out")

    p = add("continue", cmd_continue, "continue a branch from a bifurcation point")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--f", type=float, required=True)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--candidate-index", type=int, default=0)
    p.add_argument("--ds", type=float, default=0.02)
    p.add_argument("--max-steps", type=int, default=2000)
    p.add_argument("--out")

    p = add("evolve", cmd_evolve, "time integration with the splitting scheme")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--f", type=float, required=True)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--zeta", type=float, required=True)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tmax", type=float, default=50.0)
    p.add_argument("--init", nargs="+", default=["random:0"])
    p.add_argument("--stride", type=int, default=1, help="write every n-th step")
    p.add_argument("--out")

    p = add("soliton", cmd_soliton, "staged soliton continuation and periodic rescaling")
    p.add_argument("--d", type=float, default=0.1)
    p.add_argument("--zeta-tilde", type=float, default=5.0)
    p.add_argument("--f-tilde", type=float, default=2.9)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--kind", choices=("bump", "dip"), default="bump")
    p.add_argument("--torus-modes", type=int, default=256)
    p.add_argument("--out")

    p = add("rerun", cmd_rerun, "repeat a run from its manifest")
    p.add_argument("manifest")
    return parser


def _report(exc, code):
    payload = {"error": type(exc).__name__, "code": code, "message": str(exc)}
    for attr in ("stage", "last_value", "residual"):
        if getattr(exc, attr, None) is not None:
            payload[attr] = getattr(exc, attr)
    sys.stderr.write(dumps_json(payload))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command != "rerun":
            _validate(args)
        return args.func(args)
    except LLEError as exc:
        _report(exc, exc.exit_code)
        return exc.exit_code
    except ValueError as exc:
        _report(exc, 2)
        return 2


if __name__ == "__main__":
    sys.exit(main())
