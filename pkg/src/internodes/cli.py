"""Command-line interface: ``internodes run|sweep|list-cases|dump-case``.

Exit codes: 0 on success, 2 when a Krylov solve does not converge, 3 on a
configuration error (including coupling layouts the solver rejects), 1 on
any other failure.
"""
from __future__ import annotations

import argparse
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .cases import builtin_cases
from .config import ConfigError, case_to_config, dump_config, load_config
from .harness import (SolverSettings, fit_rate, reports_to_csv, run_case, run_sweep,
                      solution_grid_csv)

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_FAILURE", "EXIT_NOT_CONVERGED",
           "EXIT_CONFIG"]

EXIT_OK, EXIT_FAILURE, EXIT_NOT_CONVERGED, EXIT_CONFIG = 0, 1, 2, 3

#: Largest ``nbar`` a 3D case runs at without ``--full``.
SMOKE_NBAR_3D = 3
#: Resolutions of a full 3D sweep (hours of CPU time at the finest level).
FULL_NBARS_3D = (2, 4, 6, 8)

_CONFIG_ERRORS = ("ConfigError", "CouplingError", "KeyError")


def _parse_degrees(text: str):
    """``"2,3"`` -> [2, 3]; ``"4-3,6-5"`` -> [(4, 3), (6, 5)]."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        out.append(tuple(int(v) for v in item.split("-")) if "-" in item else int(item))
    if not out:
        raise argparse.ArgumentTypeError("empty degree list")
    return out


def _parse_ints(text: str):
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("resolutions must be positive integers")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="internodes",
                                     description="INTERNODES multipatch isogeometric solver")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--solver", choices=("bicgstab", "gmres", "monolithic"))
        p.add_argument("--tol", type=float)
        p.add_argument("--max-it", type=int)
        p.add_argument("--precond", choices=("none", "dn", "local_schur"))
        p.add_argument("--out", type=Path, default=Path("internodes_out"),
                       help="output directory (created if missing)")
        p.add_argument("--full", action="store_true",
                       help="allow 3D cases beyond smoke resolution")
        p.add_argument("--no-timing", action="store_true",
                       help="write 0 in the seconds column (byte-identical reruns)")

    run = sub.add_parser("run", help="solve one configuration")
    run.add_argument("config", help="YAML file or built-in case name")
    run.add_argument("--p", type=_parse_degrees, help="degree (overrides the config)")
    run.add_argument("--nbar", type=_parse_ints, help="resolution (overrides the config)")
    run.add_argument("--no-grid", action="store_true", help="skip solution_grid.csv")
    solver_flags(run)

    sweep = sub.add_parser("sweep", help="convergence sweep over degrees and resolutions")
    sweep.add_argument("config", help="YAML file or built-in case name")
    sweep.add_argument("--p", type=_parse_degrees, help="degrees, e.g. 2,3 or 4-3,6-5")
    sweep.add_argument("--nbar", type=_parse_ints, help="resolutions, e.g. 8,16,24,32")
    solver_flags(sweep)

    sub.add_parser("list-cases", help="list the built-in cases")

    dump = sub.add_parser("dump-case", help="print a built-in case as an explicit YAML config")
    dump.add_argument("name")
    dump.add_argument("--p", type=_parse_degrees)
    dump.add_argument("--nbar", type=_parse_ints)
    dump.add_argument("--out", type=Path, help="write to this file instead of stdout")
    return parser


def _load(arg: str):
    if arg in builtin_cases():
        return load_config(f"case: {arg}\n")
    return load_config(Path(arg))


def _apply_flags(cfg, args):
    s = cfg.solver
    cfg.solver = SolverSettings(args.solver or s.method, args.tol or s.tol,
                                args.max_it or s.max_it, args.precond or s.precond)


def _check_3d(cfg, nbars, full: bool):
    case = builtin_cases().get(cfg.case) if cfg.case else None
    if case is None or case.dim != 3 or full:
        return
    too_big = [n for n in nbars if n is not None and n > SMOKE_NBAR_3D]
    if too_big:
        raise ConfigError(f"3D case {cfg.case!r} limited to nbar <= {SMOKE_NBAR_3D} "
                          f"without --full (asked for {too_big})")


def _meta(cfg, reports, rates=None) -> str:
    lines = ["# configuration", dump_config(cfg.raw).rstrip(), "", "# results"]
    for r in reports:
        status = "ok" if r.converged else (r.error or "not converged")
        lines.append(f"p={r.row()['p']} nbar={r.nbar} d_gamma={r.d_gamma:.6e} "
                     f"its={r.its} status={status}")
    for p, (slope, ci) in (rates or {}).items():
        lines.append(f"rate p={p}: slope={slope:.4f} ci95=({ci[0]:.4f}, {ci[1]:.4f})")
    lines += ["", "# versions", f"internodes {__version__}", f"python {platform.python_version()}",
              f"numpy {np.__version__}", f"scipy {scipy.__version__}"]
    return "\n".join(lines) + "\n"


def _exit_code(reports) -> int:
    for r in reports:
        if r.error:
            if r.error.startswith("build") or any(e in r.error for e in _CONFIG_ERRORS):
                return EXIT_CONFIG
            return EXIT_FAILURE
    if any(not r.converged for r in reports):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _cmd_run(args) -> int:
    cfg = _load(args.config)
    _apply_flags(cfg, args)
    p = args.p[0] if args.p else None
    nbar = args.nbar[0] if args.nbar else None
    _check_3d(cfg, [nbar if nbar is not None else cfg.nbar], args.full)
    rep = run_case(cfg.run_config(p, nbar))
    timing = not args.no_timing
    _write(args.out, "report.csv", reports_to_csv([rep], timing))
    _write(args.out, "meta.txt", _meta(cfg, [rep]))
    if rep.solution is not None and not args.no_grid:
        _write(args.out, "solution_grid.csv",
               solution_grid_csv(rep.solution, int(cfg.output.get("grid_density", 2))))
    print(reports_to_csv([rep], timing), end="")
    if rep.error:
        print(f"error: {rep.error}", file=sys.stderr)
    return _exit_code([rep])


def _cmd_sweep(args) -> int:
    cfg = _load(args.config)
    _apply_flags(cfg, args)
    case = builtin_cases().get(cfg.case) if cfg.case else None
    ps = args.p or [cfg.p if cfg.p is not None else (case.default_p if case else None)]
    if args.nbar:
        nbars = args.nbar
    elif cfg.nbar is not None:
        nbars = list(cfg.nbars or [cfg.nbar])
    elif case is not None:
        nbars = list(FULL_NBARS_3D if (case.dim == 3 and args.full) else case.default_nbars)
    else:
        raise ConfigError("sweep needs --nbar or an 'nbar' entry")
    _check_3d(cfg, nbars, args.full)
    if case is not None:
        reports, rates = run_sweep(cfg.run_config(), ps, nbars)
    else:
        reports, rates = [], {}
        for p in ps:
            block = []
            for n in nbars:
                try:
                    rc = cfg.run_config(p, n)
                except ConfigError as exc:
                    print(f"error: {exc}", file=sys.stderr)
                    return EXIT_CONFIG
                r = run_case(rc)
                r.solution = None
                block.append(r)
            reports.extend(block)
            good = [r for r in block if not r.error]
            if len(good) >= 2:
                rates[p] = fit_rate([r.h for r in good], [r.err_broken for r in good])
    timing = not args.no_timing
    csv_text = reports_to_csv(reports, timing)
    _write(args.out, "report.csv", csv_text)
    _write(args.out, "meta.txt", _meta(cfg, reports, rates))
    print(csv_text, end="")
    for p, (slope, ci) in rates.items():
        print(f"# rate p={p}: {slope:.3f} (95% CI {ci[0]:.3f}..{ci[1]:.3f})")
    for r in reports:
        if r.error:
            print(f"error (p={r.p}, nbar={r.nbar}): {r.error}", file=sys.stderr)
    return _exit_code(reports)


def _cmd_list(args) -> int:
    for name, case in builtin_cases().items():
        nb = ",".join(map(str, case.default_nbars))
        print(f"{name:24s} {case.dim}D  p={case.default_p}  nbar={nb}  {case.description}")
    return EXIT_OK


def _cmd_dump(args) -> int:
    cases = builtin_cases()
    if args.name not in cases:
        raise ConfigError(f"unknown case {args.name!r}")
    built = cases[args.name](args.nbar[0] if args.nbar else None, args.p[0] if args.p else None)
    text = dump_config(case_to_config(built, args.name))
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
    else:
        print(text, end="")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "sweep": _cmd_sweep, "list-cases": _cmd_list,
               "dump-case": _cmd_dump}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
