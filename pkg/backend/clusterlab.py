"""
clusterlab Command-Line Tool
============================
Entry point for the cluster-size calculus, invariance checks, simulators
and Monte Carlo analysis.

Subcommands:
    simulate   simulate a path of the configured process; summary or 0/1 text
    analyze    Monte Carlo cluster report + window law + CSVs for a run config
    calculus   exact cluster report from a side-count pmf file
    verify     invariance sweep over a window-law file
    demo       reproduce both worked examples and print a pass/fail table

Run:
    python clusterlab.py calculus --pmf data/examples/uniform012.json
    python clusterlab.py verify --law data/examples/iid_p05.json --max-set-size 2
    python clusterlab.py analyze --config data/examples/moving_maxima_r3.json --output out/
    python clusterlab.py demo --seed 42

Exit codes:
    0  all checks passed
    1  at least one check failed
    2  configuration or input error
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from services.cluster_calculus import moments_report
from services.core_types import ProcessSpec
from services.demo import run_demo
from services.errors import ClusterLabError, ConfigError, ThetaZero
from services.estimation import collect_cluster_samples, cross_check_samples, window_law_from_samples
from services.invariance import sweep_invariance
from services.reporting import (
    checks_to_text,
    load_pmf,
    load_window_law,
    write_checks,
    write_json,
    write_report,
    write_window_law,
)
from services.run_config import RunConfig, ensure_output_dir, load_run_config, resolve_threads
from services.simulators import path_summary, simulate_path

logger = logging.getLogger("clusterlab")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2

DEMO_SEED = 42


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--threads", type=int, help="worker threads (default: CLUSTERLAB_THREADS or all cores)")
    common.add_argument("--output", help="output directory (default: config output_dir, else stdout)")
    common.add_argument("--format", choices=("json", "csv", "both"), help="output files to write")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="clusterlab", description=__doc__.split("\n\n")[0])
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", parents=[common], help="simulate a path")
    simulate.add_argument("--length", type=int, help="path length")
    simulate.add_argument("--paths", action="store_true", help="write the 0/1 path, not only the summary")

    commands.add_parser("analyze", parents=[common], help="Monte Carlo cluster report")

    calculus = commands.add_parser("calculus", parents=[common], help="exact report from a pmf file")
    calculus.add_argument("--pmf", help="side-count pmf JSON ({offset: 0, probs, infinity_mass})")

    verify = commands.add_parser("verify", parents=[common], help="invariance sweep over a law file")
    verify.add_argument("--law", help="window law JSON ({u, v, entries, source})")
    verify.add_argument("--max-set-size", type=int, help="largest index set |A| (default 2)")
    verify.add_argument("--tolerance-sigma", type=float, help="standard errors for empirical laws")

    demo = commands.add_parser("demo", parents=[common], help="reproduce the worked examples")
    demo.add_argument("--samples", type=int, help="conditioning instants per Monte Carlo scenario")
    demo.add_argument("--cluster-window", type=int, help="scan window W")
    return parser


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        force=True,
    )


# =============================================================================
# helpers
# =============================================================================

def _pick(flag, configured):
    """Command-line value when given (even 0), else the config value."""
    return flag if flag is not None else configured


def _output_dir(args, config: RunConfig):
    path = args.output or config.output_dir
    return ensure_output_dir(path) if path is not None else None


def _format(args, config: RunConfig) -> str:
    return args.format or config.format


def _spec(config: RunConfig) -> ProcessSpec:
    if config.spec is None:
        raise ConfigError("run config has no 'spec' section; expected: {model, params, seed}")
    return config.spec.to_spec()


def _print_json(data) -> None:
    sys.stdout.write(json.dumps(data, indent=2, allow_nan=False) + "\n")


# =============================================================================
# subcommands
# =============================================================================

def cmd_simulate(args, config: RunConfig) -> int:
    spec = _spec(config)
    length = _pick(args.length, config.simulate.length)
    summary_only = config.simulate.summary_only and not args.paths
    seed = args.seed if args.seed is not None else config.estimation.master_seed

    path = simulate_path(spec, length, seed)
    summary = path_summary(path)
    summary["seed"] = seed
    logger.info(f"[Simulate] {spec.label()}: {length:,} steps, marginal {summary['marginal']:.6g}")

    output = _output_dir(args, config)
    if output is None:
        if summary_only:
            _print_json(summary)
        else:
            sys.stdout.write(path.to_text() + "\n")
        return EXIT_OK

    write_json(summary, output / "summary.json")
    if not summary_only:
        (output / "path.txt").write_text(path.to_text() + "\n")
    return EXIT_OK


def cmd_analyze(args, config: RunConfig) -> int:
    spec = _spec(config)
    cfg = config.estimation.to_config(args.seed, resolve_threads(args.threads, config))

    samples = collect_cluster_samples(spec, cfg)
    report = cross_check_samples(samples, cfg.tolerance_sigma)
    law = window_law_from_samples(samples)

    settings = cfg.to_dict()
    # worker count does not change results
    settings.pop("threads")
    extra = {"spec": spec.to_dict(), "estimation": settings}

    output = _output_dir(args, config)
    if output is None:
        data = dict(extra)
        data.update(report.to_dict())
        data["window_law"] = law.to_dict()
        _print_json(data)
    else:
        write_report(report, output, _format(args, config), extra)
        write_window_law(law, output / "window_law.json")

    for check in report.checks:
        if not check.passed:
            logger.warning(f"[Analyze] check failed: {check.identity_name} ({check.context}) "
                           f"residual {check.residual:.3g} > {check.tolerance:.3g}")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_calculus(args, config: RunConfig) -> int:
    path = args.pmf or config.calculus_input
    if path is None:
        raise ConfigError("calculus needs a pmf file: --pmf PATH or calculus_input in the config")

    side = load_pmf(path)
    try:
        report = moments_report(side)
    except ThetaZero as exc:
        logger.warning(f"[Calculus] {exc}; writing the partial report")
        report = exc.report
        if report is None:
            raise

    output = _output_dir(args, config)
    if output is None:
        _print_json(report.to_dict())
    else:
        write_report(report, output, _format(args, config))
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_verify(args, config: RunConfig) -> int:
    path = args.law or config.verify_input
    if path is None:
        raise ConfigError("verify needs a law file: --law PATH or verify_input in the config")

    max_set_size = _pick(args.max_set_size, config.verify.max_set_size)
    sigma = _pick(args.tolerance_sigma, config.verify.tolerance_sigma)
    law = load_window_law(path)
    checks = sweep_invariance(law, max_set_size, sigma=sigma)

    output = _output_dir(args, config)
    if output is None:
        sys.stdout.write(checks_to_text(checks))
    else:
        write_checks(checks, output, _format(args, config))

    failed = sum(not check.passed for check in checks)
    if failed:
        logger.warning(f"[Verify] {failed} of {len(checks)} checks failed")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def cmd_demo(args, config: RunConfig) -> int:
    seed = args.seed if args.seed is not None else DEMO_SEED
    samples = _pick(args.samples, config.estimation.n_conditional_samples)
    cluster_window = _pick(args.cluster_window, config.estimation.cluster_window)
    result = run_demo(seed, samples, resolve_threads(args.threads, config), cluster_window)

    sys.stdout.write(result.to_text())
    output = _output_dir(args, config)
    if output is not None:
        result.table().to_csv(output / "demo.csv", index=False, lineterminator="\n")
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "calculus": cmd_calculus,
    "verify": cmd_verify,
    "demo": cmd_demo,
}


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse argv, run one subcommand and return its exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG_ERROR if exc.code else EXIT_OK

    configure_logging(args.verbose)
    try:
        config = load_run_config(args.config) if args.config else RunConfig()
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError(f"--seed must be an unsigned 64-bit integer, got {args.seed}")
        return COMMANDS[args.command](args, config)
    except ClusterLabError as exc:
        logger.error(f"[{args.command.capitalize()}] {type(exc).__name__}: {exc}")
        return EXIT_CONFIG_ERROR


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
