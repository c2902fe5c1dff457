"""Command-line driver.

Subcommands: ``sweep``, ``optimize``, ``refbeam``, ``mc`` and ``validate``.
Exit status is 0 on success, 1 for configuration errors and 2 when a
numerical check fails or a row could not be computed.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .scenarios import (
    ConfigError,
    Model,
    NumericalFailure,
    ScenarioConfig,
    reference_beam_study,
    run_mc_saturation,
    sweep,
    write_optimize,
)
from .validation import run_validation

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2

log = logging.getLogger("phaseref")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat TOML scenario file")
    common.add_argument("--out", help="CSV output path (a .meta.json sidecar is written next to it)")
    common.add_argument("--seed", type=int, help="override the config seed (unsigned 64-bit)")
    common.add_argument("--threads", type=int, default=1, help="worker processes")
    common.add_argument("--cutoff-guard", type=int, help="override the Fock cutoff guard band")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="phaseref", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep", parents=[common], help="one optimised row per (n_bar, model)")
    sub.add_parser("optimize", parents=[common], help="argmax of each model over tau and f")
    sub.add_parser("refbeam", parents=[common], help="delta phi_- versus reference amplitude")
    sub.add_parser("mc", parents=[common], help="Monte Carlo check of the Cramer-Rao bound")
    sub.add_parser("validate", parents=[common], help="oracle cross-check suite")
    return parser


def _load(args) -> ScenarioConfig:
    if args.config is None:
        if args.command == "validate":
            cfg = ScenarioConfig()
        else:
            raise ConfigError(f"{args.command} needs --config")
    else:
        cfg = ScenarioConfig.load(args.config)
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg.with_overrides(seed=args.seed, cutoff_guard=args.cutoff_guard)


def _emit(text: str, result, out) -> None:
    if out:
        meta = result.write(out)
        log.info("wrote %s and %s", out, meta)
    else:
        sys.stdout.write(text)


def _run(args) -> int:
    cfg = _load(args)
    if args.command == "validate":
        report = run_validation(cfg.policy)
        for line in report.lines():
            print(line)
        return EXIT_OK if report.passed else EXIT_NUMERICAL

    if args.command == "sweep":
        result = sweep(cfg, args.threads)
        _emit(result.to_csv(), result, args.out)
        bad = result.failed
    elif args.command == "optimize":
        text, rows = write_optimize(args.out, cfg)
        if not args.out:
            sys.stdout.write(text)
        bad = [r for r in rows if r["error"]]
    elif args.command == "refbeam":
        if not cfg.beta:
            raise ConfigError("refbeam needs a beta grid")
        result = reference_beam_study(cfg.n_bar[0], cfg.eta, cfg.beta, config=cfg, workers=args.threads)
        _emit(result.to_csv(), result, args.out)
        for key, value in result.report.items():
            log.info("%s: %s", key, value)
        bad = result.failed
    else:
        if Model.MC_SATURATION not in cfg.model:
            raise ConfigError("mc needs model = \"MC_SATURATION\"")
        report = run_mc_saturation(cfg, args.threads)
        _emit(report.to_csv(), report, args.out)
        bad = []

    for row in bad:
        log.error("failed row: %s", row)
    return EXIT_NUMERICAL if bad else EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (NumericalFailure, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
