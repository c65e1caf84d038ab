"""Command line entry point: ``succapprox {run,verify,probe}``.

Exit codes: 0 success, 1 invariant violation, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import sys

from .errors import PreconditionError
from .harness import SUITES, ConfigError, load_config, parse_config, run_experiment, write_outputs

DEFAULTS = {
    "verify": {"experiment": {"type": "verify"}},
    "probe": {"experiment": {"type": "probe"}},
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="succapprox", description=__doc__.splitlines()[0])
    parser.add_argument("--list-suites", action="store_true", help="list the verify suites and exit")
    sub = parser.add_subparsers(dest="command")
    for name, text in (("run", "run the experiment named in the config"),
                       ("verify", "run property suites"),
                       ("probe", "sample random pairs and report regularity fractions")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=name == "run", help="JSON experiment config")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--seed", type=int, help="seed; overrides the config's seed")
        if name == "verify":
            p.add_argument("--list-suites", action="store_true", help="list the verify suites and exit")
    return parser


def list_suites() -> str:
    width = max(len(n) for n in SUITES)
    return "\n".join(f"{name:<{width}}  {desc}" for name, (desc, _) in SUITES.items())


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.list_suites:
        print(list_suites())
        return 0
    if args.command is None:
        _parser().print_usage(sys.stderr)
        return 2
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return 2
    try:
        if args.config:
            cfg = load_config(args.config, args.seed)
        else:
            cfg = parse_config(dict(DEFAULTS[args.command]), args.seed)
        if args.command != "run" and cfg.experiment.type != args.command:
            raise ConfigError(f"'{args.command}' needs a {args.command} experiment, "
                              f"the config names {cfg.experiment.type!r}")
        result = run_experiment(cfg)
    except (ConfigError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in write_outputs(result, args.out):
        print(f"wrote {path}")
    if not result.ok:
        print(f"{len(result.violations)} invariant violation(s):", file=sys.stderr)
        for line in result.violations:
            print(f"  {line}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
