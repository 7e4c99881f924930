"""Command line entry point: validate, run and sweep subcommands."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments as ex
from .config import load_run_config, load_sweep_config, validate
from .errors import TrafficModelError

EXIT_OK, EXIT_ADMISSIBILITY, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

SWEEP_COMMANDS = {
    "sweep-epsilon": ex.sweep_epsilon,
    "sweep-gamma": ex.compare_gamma_zero,
    "stability": ex.stability,
    "compare-solvers": ex.compare_solvers,
}
DEFAULT_AXIS = {"sweep-epsilon": "epsilon", "sweep-gamma": "gamma", "compare-solvers": "grid"}


def build_parser():
    p = argparse.ArgumentParser(prog="nonlocal-traffic",
                                description="Solvers and experiments for the delayed nonlocal traffic model.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ["validate", "run", *SWEEP_COMMANDS]:
        s = sub.add_parser(name)
        s.add_argument("--config", required=name != "validate", help="INI config file")
        s.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
        if name != "validate":
            s.add_argument("--out", required=True, help="output directory")
        if name in SWEEP_COMMANDS:
            s.add_argument("--workers", type=int, default=1)
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _emit_error(exc, code):
    payload = exc.to_dict() if isinstance(exc, TrafficModelError) else {"error": type(exc).__name__,
                                                                        "message": str(exc)}
    payload["exit_code"] = code
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.override)
    try:
        if args.command == "validate":
            cfg = load_run_config(args.config, overrides=overrides)
            report = validate(cfg)
            print(json.dumps({"ok": True, "config_hash": cfg.config_hash(), "admissibility": report.to_dict()},
                             sort_keys=True, default=float))
        elif args.command == "run":
            out = ex.run(load_run_config(args.config, overrides=overrides, out_dir=args.out))
            print(out)
        else:
            if args.command in DEFAULT_AXIS and not any(o.startswith("sweep.axis=") for o in overrides):
                overrides.insert(0, f"sweep.axis={DEFAULT_AXIS[args.command]}")
            sweep = load_sweep_config(args.config, overrides=overrides, out_dir=args.out)
            validate(sweep.base)
            rows = SWEEP_COMMANDS[args.command](sweep, out_dir=args.out, workers=args.workers)
            print(f"{len(rows)} rows written to {args.out}")
    except TrafficModelError as exc:
        return _emit_error(exc, exc.exit_code)
    except OSError as exc:
        return _emit_error(exc, EXIT_IO)
    except ValueError as exc:
        return _emit_error(exc, EXIT_ADMISSIBILITY)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
