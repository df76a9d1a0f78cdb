"""Command-line interface.

Subcommands: check-lemmas, run-chain, sweep, fit-scaling, emit-plot-data.
Exit codes: 0 success, 1 check failure, 2 usage/config error, 3 IO error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .checks import NOT_APPLICABLE, PASS, CheckConfig, run_checks
from .harness import (
    ChainRunConfig,
    ConfigError,
    SweepConfig,
    emit_plot_data,
    fit_scaling,
    load_json_config,
    read_records,
    run_chain_command,
    run_sweep,
    write_records,
)

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randhmc",
        description="Randomized-integration-time HMC for Gaussian targets: "
        "lemma checks, chain runs, and scaling sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-lemmas", help="run the lemma-check suite")
    p.add_argument("--config", help="JSON file with CheckConfig fields")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--only", help="run a single named check")
    p.add_argument("--out", help="write a JSON report here")

    p = sub.add_parser("run-chain", help="run one chain or a replica ensemble")
    p.add_argument("--config", required=True, help="JSON file with ChainRunConfig fields")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("sweep", help="run a kappa/d scaling sweep")
    p.add_argument("--config", required=True, help="JSON file with SweepConfig fields")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--threads", type=int, default=1, help="grid points run in parallel")

    p = sub.add_parser("fit-scaling", help="fit a log-log slope to a sweep CSV")
    p.add_argument("csv", help="sweep CSV path")
    p.add_argument("--axis", choices=("kappa", "d"), required=True)
    p.add_argument("--out", help="write the fit as JSON here")

    p = sub.add_parser("emit-plot-data", help="emit plot-ready columns from a sweep CSV")
    p.add_argument("csv", help="sweep CSV path")
    p.add_argument("--axis", choices=("kappa", "d"), required=True)
    p.add_argument("--out", required=True, help="output TSV path")
    return parser


def _cmd_check_lemmas(args) -> int:
    raw = load_json_config(args.config) if args.config else {}
    if args.seed is not None:
        raw["seed"] = args.seed
    try:
        cfg = CheckConfig.from_dict(raw)
        results = run_checks(cfg, only=args.only)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for r in results:
        print(f"{r.status.upper():>14} {r.name} [{r.elapsed:.2f}s] {r.detail}")
    if args.out:
        report = [
            {"name": r.name, "status": r.status, "detail": r.detail, "elapsed": r.elapsed}
            for r in results
        ]
        try:
            with open(args.out, "w") as fh:
                json.dump(report, fh, indent=2)
        except OSError as exc:
            raise IOError(f"cannot write report to {args.out}: {exc}") from exc
    n_bad = sum(1 for r in results if r.status != PASS)
    n_na = sum(1 for r in results if r.status == NOT_APPLICABLE)
    if n_bad:
        print(f"{n_bad} of {len(results)} checks did not pass ({n_na} not applicable)")
        return EXIT_CHECK_FAILURE
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def _cmd_run_chain(args) -> int:
    raw = load_json_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = ChainRunConfig.from_dict(raw)
    records = run_chain_command(cfg)
    write_records(args.out, records)
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    raw = load_json_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = SweepConfig.from_dict(raw)
    records = run_sweep(cfg, threads=args.threads)
    write_records(args.out, records)
    n_conv = sum(1 for r in records if r.converged)
    print(f"wrote {len(records)} records ({n_conv} converged) to {args.out}")
    return EXIT_OK


def _cmd_fit_scaling(args) -> int:
    records = read_records(args.csv)
    try:
        slope, stderr = fit_scaling(records, args.axis)
    except ValueError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILURE
    print(f"axis={args.axis} slope={slope:.6f} stderr={stderr:.6f}")
    if args.out:
        try:
            with open(args.out, "w") as fh:
                json.dump({"axis": args.axis, "slope": slope, "stderr": stderr}, fh, indent=2)
        except OSError as exc:
            raise IOError(f"cannot write fit to {args.out}: {exc}") from exc
    return EXIT_OK


def _cmd_emit_plot_data(args) -> int:
    records = read_records(args.csv)
    emit_plot_data(records, args.axis, args.out)
    print(f"wrote plot data to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "check-lemmas": _cmd_check_lemmas,
    "run-chain": _cmd_run_chain,
    "sweep": _cmd_sweep,
    "fit-scaling": _cmd_fit_scaling,
    "emit-plot-data": _cmd_emit_plot_data,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IOError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry():  # console-script target
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
