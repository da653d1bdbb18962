"""Command-line front end.

Subcommands consume a JSON experiment config and write machine-readable
reports. Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import runner
from .acceptance import run_all
from .config import load_config
from .errors import AdlabError, ConfigError
from .report import write_report


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="adlab",
        description="numerical laboratory for superadiabatic matrix evolutions",
    )
    p.add_argument("--tol", type=float, default=None,
                   help="override the config integration tolerance")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    sub = p.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("decompose", "spectral decomposition of the family over the time grid"),
        ("evolve", "rescaled propagator norms over the epsilon grid"),
        ("superadiabatic", "hierarchy scan with delta/error tables and fits"),
        ("nilpotent", "nilpotent growth laws and the boundedness dichotomy"),
        ("example", "closed-form checks of the rotated 3x3 model"),
        ("dephased", "dephased within-subspace growth fits"),
    ]:
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="path to the JSON experiment config")

    fp = sub.add_parser("fit", help="fit a scaling law to a CSV series")
    fp.add_argument("csv", help="CSV with columns epsilon,value,log_scale")
    fp.add_argument("model", choices=["exp_inverse_eps", "stretched_exp", "power_law"])

    ap = sub.add_parser("acceptance", help="run the acceptance battery")
    ap.add_argument("--json", dest="json_out", default=None,
                    help="also write the results to this JSON file")
    return p


def _read_series(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read series {path!r}: {exc}") from exc
    if not lines:
        raise ConfigError("series file is empty")
    header = [c.strip() for c in lines[0].split(",")]
    try:
        ie, iv = header.index("epsilon"), header.index("value")
    except ValueError as exc:
        raise ConfigError("series needs 'epsilon' and 'value' columns") from exc
    il = header.index("log_scale") if "log_scale" in header else None
    series = []
    for ln in lines[1:]:
        cells = ln.split(",")
        try:
            series.append((float(cells[ie]), float(cells[iv]),
                           float(cells[il]) if il is not None else 0.0))
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"malformed series row {ln!r}: {exc}") from exc
    return series


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "acceptance":
            results = run_all()
            if args.json_out:
                payload = [{"number": r.number, "name": r.name, "passed": r.passed,
                            "detail": r.detail, "seconds": r.seconds}
                           for r in results]
                with open(args.json_out, "w", encoding="utf-8") as fh:
                    json.dump(payload, fh, indent=1, sort_keys=True)
                    fh.write("\n")
            return 0 if all(r.passed for r in results) else 3

        if args.command == "fit":
            report = runner.run_fit(_read_series(args.csv), args.model)
            sys.stdout.write(report.to_json())
            return 0

        config = load_config(args.config)
        if args.tol is not None:
            config = dataclasses.replace(config, tol=args.tol)
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)

        csv_table = None
        if args.command == "decompose":
            report = runner.run_decompose(config)
        elif args.command == "evolve":
            report = runner.run_evolve(config)
        elif args.command == "superadiabatic":
            report, csv_table = runner.run_superadiabatic_scan(config)
        elif args.command == "nilpotent":
            report, csv_table = runner.run_nilpotent_scan(config)
        elif args.command == "example":
            report = runner.run_example(config)
        elif args.command == "dephased":
            report = runner.run_dephased(config)
        else:  # pragma: no cover
            raise ConfigError(f"unknown command {args.command!r}")

        if config.outputs:
            write_report(report, config.outputs, csv_table)
        else:
            sys.stdout.write(report.to_json())
        return 0
    except ConfigError as exc:
        sys.stderr.write(f"adlab: config error: {exc}\n")
        return 2
    except AdlabError as exc:
        sys.stderr.write(f"adlab: numerical failure: {type(exc).__name__}: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
