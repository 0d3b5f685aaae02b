"""Command-line entry point: ``simulate``, ``verify`` and ``bench``."""
from __future__ import annotations

import argparse
import json
import sys

from . import harness
from .exceptions import PreconditionError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_FS = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="bandit-coord",
                                description="Bandit submodular coordination simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run Monte-Carlo trials and write results")
    sim.add_argument("--config", required=True)
    sim.add_argument("--with-oracle", action="store_true",
                     help="also compute hindsight optima (refused above the enumeration budget)")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--output", help="output directory (overrides the config)")

    ver = sub.add_parser("verify", help="run the built-in property suite")
    ver.add_argument("--inject-supermodular", action="store_true",
                     help="add a supermodular function to the suite (self-test of the verifier)")

    b = sub.add_parser("bench", help="time one trial and count gated evaluations")
    b.add_argument("--config", required=True)
    return p


def _load(args):
    cfg = harness.load_config(args.config)
    if getattr(args, "trials", None) is not None:
        if args.trials < 1:
            raise harness.ConfigError("--trials must be >= 1")
        cfg.trials = args.trials
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise harness.ConfigError("--seed must be >= 0")
        cfg.seed = args.seed
    if getattr(args, "output", None):
        cfg.output_dir = args.output
    return cfg


def _simulate(args):
    cfg = _load(args)
    result = harness.simulate(cfg, with_oracle=args.with_oracle)
    if result.oracle_refused:
        print(f"oracle refused: {result.oracle_refused}", file=sys.stderr)
    try:
        out = harness.write_results(result)
    except OSError as exc:
        print(f"error: cannot write results: {exc}", file=sys.stderr)
        return EXIT_FS
    print(f"wrote {out / 'results.csv'} and {out / 'summary.json'}")
    return EXIT_OK


def _verify(args):
    extra = [harness.supermodular_function()] if args.inject_supermodular else []
    failed = 0
    for check in harness.run_checks(extra):
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}"
              + (f"  [{check.detail}]" if check.detail else ""))
        failed += not check.passed
    if failed:
        print(f"{failed} check(s) failed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _bench(args):
    cfg = _load(args)
    print(json.dumps(harness.bench(cfg), indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return {"simulate": _simulate, "verify": _verify, "bench": _bench}[args.command](args)
    except (harness.ConfigError, PreconditionError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FS


if __name__ == "__main__":
    sys.exit(main())
