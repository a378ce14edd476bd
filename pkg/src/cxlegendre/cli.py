"""Command-line driver: ``cxlegendre verify|refine|transform|list-scenarios``."""

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, LegendreError
from .harness import SCENARIOS, ScenarioConfig, list_scenarios, refinement_study, run_scenario, transform_only

EXIT_PASS = 0
EXIT_CONFIG = 1
EXIT_FAIL = 2

log = logging.getLogger("cxlegendre")


def _config(args):
    """A config file path, or a bare scenario name for its defaults."""
    target = args.config
    if not Path(target).exists() and target in SCENARIOS:
        cfg = ScenarioConfig.named(target)
    else:
        cfg = ScenarioConfig.load(target)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output = args.out
    return cfg


def _common(p):
    p.add_argument("config", help="JSON config file or a scenario name")
    p.add_argument("--out", help="output directory for reports and CSV files")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--tolerance-scale", type=float, default=1.0,
                   help="multiply every defect tolerance by this factor")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for multi-resolution runs")


def build_parser():
    parser = argparse.ArgumentParser(prog="cxlegendre", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("verify", help="run a scenario and report pass/fail per check"))
    _common(sub.add_parser("refine", help="defects and fitted orders across resolutions"))
    _common(sub.add_parser("transform", help="write L(eta) and G(eta) for a config"))
    sub.add_parser("list-scenarios", help="print the built-in scenarios")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.command == "list-scenarios":
        for name, desc in list_scenarios().items():
            print(f"{name:28s} {desc}")
        return EXIT_PASS

    try:
        if not args.tolerance_scale > 0:
            raise ConfigError("--tolerance-scale must be positive")
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        cfg = _config(args)
        if args.command == "verify":
            report = run_scenario(cfg, args.tolerance_scale, args.jobs)
            print(report.summary())
            return EXIT_PASS if report.passed else EXIT_FAIL
        if args.command == "refine":
            table = refinement_study(cfg, args.tolerance_scale, args.jobs)
            print(json.dumps(table.to_dict(), indent=2, sort_keys=True))
            return EXIT_PASS
        out = cfg.output or "."
        for path in transform_only(cfg, out):
            print(path)
        return EXIT_PASS
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LegendreError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
