"""Command line entry point: ``inls {ground-state,evolve,verify,sweep}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_config, preset_names
from .errors import ConfigurationError, HorizonError, ParameterError, SolverError
from .runner import output_root, run_dir, run_evolve, run_ground_state, run_sweep, run_verify
from .verify import SUITES

log = logging.getLogger("inls")

EXIT_OK, EXIT_FAIL, EXIT_PARAM = 0, 1, 2


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI config file")
    common.add_argument("--preset", metavar="NAME",
                        help=f"bundled preset ({', '.join(preset_names())})")
    common.add_argument("--out", metavar="DIR", help="output root (default $INLS_OUT or ./inls-out)")
    common.add_argument("--seed", type=int, help="seed for random initial data")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="inls", description="Inhomogeneous NLS workbench")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("ground-state", parents=[common], help="shoot for the ground state profile")
    sub.add_parser("evolve", parents=[common], help="evolve initial data and log diagnostics")
    v = sub.add_parser("verify", parents=[common], help="run identity/convergence suites")
    v.add_argument("--suite", action="append", choices=SUITES,
                   help="suite to run (repeatable; default: the config's list)")
    s = sub.add_parser("sweep", parents=[common], help="ground states over a (p, b) grid")
    s.add_argument("--p", type=_floats, required=True, help="comma-separated powers")
    s.add_argument("--b", type=_floats, required=True, help="comma-separated b values")
    s.add_argument("--N", type=lambda t: [int(x) for x in t.split(",")], help="dimensions")
    s.add_argument("--workers", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.preset, args.seed)
        root = output_root(args.out)
        if args.command == "ground-state":
            out = run_dir(root, f"ground-state-{cfg.name}")
            summary = run_ground_state(cfg, out)
            h = summary["header"]
            print(f"Q0 = {h['Q0']:.15g}  residual = {h['residual']:.2e}  -> {out}")
            return EXIT_OK
        if args.command == "evolve":
            out = run_dir(root, f"evolve-{cfg.name}")
            summary = run_evolve(cfg, out)
            print(f"{summary['status']} at t = {summary['t_final']:g} "
                  f"({summary['steps']} steps)  -> {out}")
            return EXIT_OK
        if args.command == "verify":
            out = run_dir(root, f"verify-{cfg.name}")
            report = run_verify(cfg, out, args.suite)
            for r in report["suites"]:
                print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}: "
                      f"{json.dumps(r['measured'], default=str)[:200]}")
            print(f"report -> {out / 'report.json'}")
            return EXIT_OK if report["passed"] else EXIT_FAIL
        if args.command == "sweep":
            out = run_dir(root, f"sweep-{cfg.name}")
            rows = run_sweep(cfg, out, args.p, args.b, args.N, args.workers)
            ok = sum(r["status"] == "converged" for r in rows)
            print(f"{ok}/{len(rows)} converged  -> {out / 'sweep.csv'}")
            return EXIT_OK if ok == len(rows) else EXIT_FAIL
    except (ParameterError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (SolverError, HorizonError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
