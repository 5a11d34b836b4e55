"""Command line entry point: ``vhdilation run | verify | equiv``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .errors import DilationError
from .linearisation import gram_norm, reconstruction_residual, unitary_equivalence
from .scenario import TASKS, Runner, exit_code, parse_scenario, run
from .serialization import (_read, dumps, load_kernel, load_linearisation, save_kernel,
                            save_linearisation)

log = logging.getLogger("vhdilation")


def _setup_logging(quiet: bool) -> None:
    level = os.environ.get("VHDILATION_LOG_LEVEL", "WARNING").upper()
    if quiet:
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _summary(report: dict) -> str:
    width = max((len(t) for t in report["tasks"]), default=0)
    lines = []
    for name, res in report["tasks"].items():
        extra = f"  {res['error']}: {res['message']}" if res["verdict"] == "error" else ""
        lines.append(f"{name:<{width}}  {res['verdict'].upper()}{extra}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    tasks = args.tasks.split(",") if args.tasks else None
    sc = parse_scenario(_read(args.scenario), seed=args.seed, tasks=tasks, tol=args.tol)
    report = run(sc)
    text = dumps(report)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text)
    elif not args.quiet:
        sys.stdout.write(text)
    if not args.quiet:
        print(_summary(report), file=sys.stderr)
    if args.save_kernel and sc.kernel is not None:
        save_kernel(sc.kernel, args.save_kernel)
    if args.save_linearisation:
        save_linearisation(Runner(sc).linearisation(), args.save_linearisation)
    return exit_code(report)


def cmd_verify(args) -> int:
    lin = load_linearisation(args.linearisation)
    k = load_kernel(args.kernel)
    if lin.kernel_digest and lin.kernel_digest != k.digest():
        log.warning("kernel hash differs from the one recorded in the linearisation")
    res = reconstruction_residual(lin, k)
    bound = 10 * lin.tol * gram_norm(k)
    ok = res <= bound
    print(dumps({"residual": res, "bound": bound, "dims": lin.dims, "verdict": "pass" if ok else "fail"}), end="")
    return 0 if ok else 1


def cmd_equiv(args) -> int:
    a = load_linearisation(args.first)
    b = load_linearisation(args.second)
    U = unitary_equivalence(a, b, args.tol)
    print(dumps({"isometry": U.isometry, "coisometry": U.coisometry,
                 "intertwining": U.intertwining, "verdict": "pass"}), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vhdilation", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the tasks of a scenario file")
    r.add_argument("scenario")
    r.add_argument("--report", help="write the JSON report here instead of stdout")
    r.add_argument("--tasks", help=f"comma separated subset of: {','.join(TASKS)}")
    r.add_argument("--seed", type=int)
    r.add_argument("--tol", type=float, help="override psd and rank tolerances")
    r.add_argument("--quiet", action="store_true")
    r.add_argument("--save-kernel", metavar="PATH")
    r.add_argument("--save-linearisation", metavar="PATH")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="check a saved linearisation against a saved kernel")
    v.add_argument("linearisation")
    v.add_argument("kernel")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("equiv", help="test two saved linearisations for unitary equivalence")
    e.add_argument("first")
    e.add_argument("second")
    e.add_argument("--tol", type=float, default=1e-8)
    e.set_defaults(func=cmd_equiv)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(getattr(args, "quiet", False))
    try:
        return args.func(args)
    except DilationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
