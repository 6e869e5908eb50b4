"""``boundary-lab CONFIG [--output-dir DIR] [--seed N] [-v]``

Exit status: 0 on success, 1 for an invalid manifest or arguments (nothing is
written), 2 when a numerical operation fails (named in ``summary.json``).
With ``--strict`` a run whose built-in expectations fail exits with 3.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import SCENARIOS, load_config
from .errors import ConfigError
from .runner import EXIT_CONFIG, EXIT_OK, run

EXIT_EXPECTATIONS = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="boundary-lab",
        description="Run a boundary-perturbation scenario from a YAML manifest.",
        epilog="scenarios: " + ", ".join(SCENARIOS),
    )
    p.add_argument("config", help="path to the YAML run manifest")
    p.add_argument("-o", "--output-dir", help="override the manifest's output_dir")
    p.add_argument("--seed", type=int, help="override the manifest's seed")
    p.add_argument("--strict", action="store_true",
                   help="exit with status 3 when any built-in expectation fails")
    p.add_argument("-v", "--verbose", action="count", default=0,
                   help="log progress (-v) or debug detail (-vv)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(output_dir=args.output_dir, seed=args.seed)
        result = run(cfg)
    except ConfigError as exc:
        print(f"boundary-lab: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    s = result.summary
    passed = sum(e["passed"] for e in s["expectations"])
    print(f"{cfg.scenario}: status={s['status']} expectations {passed}/{len(s['expectations'])} passed"
          f" -> {result.output_dir / 'summary.json'}")
    if result.status != EXIT_OK:
        print(f"boundary-lab: {s['failed_operation']} failed: {s['error']}", file=sys.stderr)
        return result.status
    if args.strict and not s["all_passed"]:
        return EXIT_EXPECTATIONS
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
