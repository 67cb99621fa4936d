"""Command-line entry point.

``cpsim <subcommand> --config FILE.toml [--seed N] [--paths N] [--out DIR]``

Exit codes: 0 success, 2 invalid configuration or arguments, 3 a statistical
check failed.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, CpsimError, TruncationError
from .harness.config import load_config
from .harness.experiments import LemmaReport, run_experiment
from .harness.output import emit_outputs

log = logging.getLogger("cpsim")

SUBCOMMANDS = {
    "sde-moments": "sde-moments",
    "sve-moments": "sve-moments",
    "strong-rate": "sde-strong-rate",
    "weak-rate": "sve-weak-rate",
    "lemma-checks": "lemma-checks",
    "kernel-table": "kernel-table",
    "oracle": "oracle",
}

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CHECK_FAILED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cpsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, kind in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="TOML experiment configuration")
        p.add_argument("--seed", type=int, help="override master-seed")
        p.add_argument("--paths", type=int, help="override n-paths")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, SUBCOMMANDS[args.command])
        cfg = cfg.with_overrides(args.seed, args.paths, args.out)
    except ConfigError as exc:
        print(f"cpsim: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        report = run_experiment(cfg)
    except TruncationError as exc:
        print(f"cpsim: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except CpsimError as exc:
        print(f"cpsim: {exc}", file=sys.stderr)
        return EXIT_INVALID
    paths = emit_outputs(report, cfg.output)
    for p in paths:
        log.info("wrote %s", p)
    passed = getattr(report, "passed", True)
    checks = getattr(report, "checks", None)
    if checks:
        for name, ok in checks.items():
            status = "n/a" if ok is None else ("PASS" if ok else "FAIL")
            print(f"{name}: {status}")
    elif isinstance(report, LemmaReport):
        print(f"lemma-checks: {'PASS' if passed else 'FAIL'}")
    print(f"outputs: {cfg.output}")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
