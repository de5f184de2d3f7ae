"""Command-line interface for spatial-aoi.

Provides argument parsing and command handlers for:
    - sweep: Run a parameter sweep and write the CSV table
    - instance: Estimate and compute the ages of one stored realization
    - bounds: Evaluate the instance-independent bounds over a sweep grid
    - sample: Draw a realization from a config and store it as text
    - selftest: Quick numerical checks

Exit codes: 0 success, 1 selftest failure, 2 configuration error, 3
capacity/timeout (partial output is still written).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import analytics, monte_carlo
from .age_dynamics import write_age_trace
from .analytics import CapacityError, ProbabilityMassError
from .channel import BROADCAST
from .config import DEFAULT_CONFIG_PATH, ConfigError, load_config, write_default_config
from .experiment import BOUND_OUTPUTS, SweepSpec, emit_csv, run_sweep
from .geometry import dump_realization, load_realization
from .monte_carlo import SimulationTimeoutError
from .selftest import run_selftest
from .util import LOG, configure_logging, expand_path, fmt_kv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def _build_parser() -> argparse.ArgumentParser:
    """Build and return the argument parser for all CLI commands.

    Returns:
        argparse.ArgumentParser: Configured parser with all subcommands.
    """
    p = argparse.ArgumentParser(
        prog="spatial-aoi",
        description="Age of broadcast/collection in random wireless networks: "
        "Monte Carlo estimates, exact values and bounds.",
    )
    p.add_argument(
        "--config",
        type=Path,
        default=DEFAULT_CONFIG_PATH,
        help=f"Config used when a command is given none (default: {DEFAULT_CONFIG_PATH})",
    )
    p.add_argument(
        "--log-level",
        default="info",
        choices=["debug", "info", "warning", "error"],
        help="Logging verbosity",
    )
    p.add_argument(
        "--log-format",
        default="plain",
        choices=["plain", "time"],
        help="Logging format",
    )
    p.add_argument(
        "--log-file",
        default=None,
        help="Optional log file path (append mode)",
    )

    sub = p.add_subparsers(dest="command", required=True)

    # sweep
    sweep = sub.add_parser("sweep", help="Run the sweep of a config and write its CSV")
    sweep.add_argument("config_file", nargs="?", type=Path, help="Sweep config (TOML)")
    sweep.add_argument("--out", type=Path, default=None, help="CSV path (default: <config>.csv)")
    sweep.add_argument("--workers", type=int, default=None, help="Override simulation.workers")
    sweep.set_defaults(func=_cmd_sweep)

    # instance
    instance = sub.add_parser("instance", help="Evaluate one stored realization")
    instance.add_argument("realization", type=Path, help="Realization file (see 'sample')")
    instance.add_argument("config_file", nargs="?", type=Path, help="Sweep config (TOML)")
    instance.add_argument("--trace", type=Path, default=None, help="Write an age trace CSV")
    instance.add_argument(
        "--trace-slots", type=int, default=1000, help="Slots in the age trace (default: 1000)"
    )
    instance.add_argument(
        "--delay-samples",
        type=int,
        default=0,
        help="Also average this many forward delay samples",
    )
    instance.set_defaults(func=_cmd_instance)

    # bounds
    bounds = sub.add_parser("bounds", help="Evaluate the closed-form bounds over the sweep grid")
    bounds.add_argument("config_file", nargs="?", type=Path, help="Sweep config (TOML)")
    bounds.add_argument("--out", type=Path, default=None, help="Optional CSV path")
    bounds.set_defaults(func=_cmd_bounds)

    # sample
    sample = sub.add_parser("sample", help="Draw a realization and write it as text")
    sample.add_argument("config_file", nargs="?", type=Path, help="Sweep config (TOML)")
    sample.add_argument("--out", type=Path, required=True, help="Realization file to write")
    sample.add_argument(
        "--index", type=int, default=0, help="Realization index under the master seed"
    )
    sample.set_defaults(func=_cmd_sample)

    # selftest
    selftest = sub.add_parser("selftest", help="Run quick numerical checks")
    selftest.set_defaults(func=_cmd_selftest)

    return p


def _load_spec(args: argparse.Namespace) -> SweepSpec:
    """Load the command's config, falling back to --config (created with defaults if missing)."""
    path = getattr(args, "config_file", None)
    if path is None:
        path = expand_path(args.config)
        if write_default_config(path):
            LOG.info("Wrote default config: %s", path)
    LOG.debug("Using config: %s", path)
    return load_config(expand_path(path))


def _cmd_sweep(args: argparse.Namespace) -> int:
    """Run a sweep and write its CSV incrementally.

    Returns:
        0 on success, 3 if some points failed (their rows are NaN).
    """
    spec = _load_spec(args)
    if args.workers is not None:
        spec = replace(spec, base=replace(spec.base, workers=args.workers))
    out = args.out
    if out is None:
        stem = args.config_file.stem if args.config_file else "sweep"
        out = Path(f"{stem}.csv")

    result = run_sweep(spec, out)
    emit_csv(result, out)
    LOG.info("Wrote %d row(s) to %s", len(result.rows), out)
    if result.failures:
        LOG.warning("%d row(s) failed (see the warnings above)", result.failures)
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_instance(args: argparse.Namespace) -> int:
    """Monte Carlo estimate and exact value for one stored realization.

    Returns:
        0 on success, 3 if an exact value could not be computed or a run timed out.
    """
    spec = _load_spec(args)
    realization = load_realization(args.realization)
    config = replace(
        spec.base,
        params=replace(spec.base.params, r=realization.node_radius),
    )
    an = spec.analytics
    rc = EXIT_OK

    print(fmt_kv("Nodes", realization.node_count))
    print(fmt_kv("Interferers", realization.interferer_count))
    print(fmt_kv("Mode", config.mode))

    try:
        res = monte_carlo.run_instance(realization, config)
        print(fmt_kv("Monte Carlo", f"{res.mean_age:.9g} +- {res.ci_half_width:.3g}"))
    except SimulationTimeoutError as e:
        LOG.warning("Monte Carlo run failed: %s", e)
        rc = EXIT_PARTIAL

    try:
        if config.mode == BROADCAST:
            exact = analytics.exact_eaob(
                realization, config.params, an.tail_tol, an.broadcast_node_cap
            )
            indep = analytics.independent_bound_eaob(
                realization, config.params, an.factor_form, an.collection_node_cap
            )
            print(fmt_kv("Exact", f"{exact:.9g}"))
            print(fmt_kv("Independent bound", f"{indep:.9g}"))
        else:
            exact = analytics.exact_eaoc(
                realization, config.params, an.collection_mu, an.factor_form, an.collection_node_cap
            )
            print(fmt_kv("Exact", f"{exact:.9g}"))
    except (CapacityError, ProbabilityMassError) as e:
        LOG.warning("%s", e)
        rc = EXIT_PARTIAL

    if args.delay_samples > 0 and realization.node_count:
        try:
            delay = monte_carlo.mean_delay(realization, config, args.delay_samples)
            print(fmt_kv("Mean delay", f"{delay.mean_age:.9g} +- {delay.ci_half_width:.3g}"))
        except SimulationTimeoutError as e:
            LOG.warning("Delay measurement failed: %s", e)
            rc = EXIT_PARTIAL

    if args.trace is not None:
        ages = monte_carlo.age_trace(realization, config, args.trace_slots)
        write_age_trace(ages, args.trace)
        LOG.info("Wrote age trace (%d slot(s)) to %s", args.trace_slots, args.trace)
    return rc


def _cmd_bounds(args: argparse.Namespace) -> int:
    """Print (and optionally write) the closed-form bounds at every grid point."""
    spec = replace(_load_spec(args), outputs=BOUND_OUTPUTS)
    result = run_sweep(spec)
    for row in result.rows:
        print(f"  {spec.parameter}={row.value:<10.6g} {row.output:<17} {row.mean:.9g}")
    if args.out is not None:
        emit_csv(result, args.out)
        LOG.info("Wrote %d row(s) to %s", len(result.rows), args.out)
    return EXIT_OK


def _cmd_sample(args: argparse.Namespace) -> int:
    """Draw realization ``--index`` of the config's spatial average and store it."""
    spec = _load_spec(args)
    realization = monte_carlo.indexed_realization(spec.base, args.index)
    dump_realization(realization, args.out)
    LOG.info(
        "Wrote realization %d (%d node(s), %d interferer(s)) to %s",
        args.index,
        realization.node_count,
        realization.interferer_count,
        args.out,
    )
    return EXIT_OK


def _cmd_selftest(_args: argparse.Namespace) -> int:
    """Run the quick checks; 1 if any failed."""
    results = run_selftest()
    for res in results:
        mark = "OK" if res.passed else "FAIL"
        print(f"  [{mark:>4}] {res.name} {res.detail}")
    failed = sum(not r.passed for r in results)
    LOG.info("%d/%d check(s) passed", len(results) - failed, len(results))
    return 0 if failed == 0 else 1


def main(argv: list[str] | None = None) -> None:
    """Entry point for the CLI application.

    Parses arguments, initializes logging, and dispatches to the command
    handler. Configuration problems exit with 2.

    Raises:
        SystemExit: With the handler's exit code.
    """
    parser = _build_parser()
    args = parser.parse_args(argv)

    configure_logging(
        level=args.log_level,
        fmt=args.log_format,
        log_file=args.log_file,
    )

    func = getattr(args, "func", None)
    if not callable(func):
        parser.print_help()
        raise SystemExit(EXIT_CONFIG)

    try:
        rc = func(args)  # pylint: disable=not-callable
    except (ConfigError, FileNotFoundError) as e:
        LOG.error("%s", e)
        rc = EXIT_CONFIG
    except ValueError as e:
        LOG.error("Invalid input: %s", e)
        rc = EXIT_CONFIG
    raise SystemExit(rc)


if __name__ == "__main__":
    main(sys.argv[1:])
