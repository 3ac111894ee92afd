"""Command-line front door: validate, run, compare, cases.

Exit codes: 0 success, 1 degraded output (corrupt records skipped),
2 configuration error, 3 comparability error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .cbr import CaseBase, CbrError
from .config import ConfigValidationError, load_scenario
from .report import (
    ComparabilityError,
    compare_reports,
    load_report,
    render_human,
    render_machine,
    save_report,
    split_by_repetition,
)
from .sim import simulate

EXIT_OK = 0
EXIT_DEGRADED = 1
EXIT_CONFIG = 2
EXIT_COMPARE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bamswitch",
        description="Per-link bandwidth allocation simulation with cognitive model switching",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a scenario configuration")
    p_validate.add_argument("--config", required=True, help="scenario YAML file")

    p_run = sub.add_parser("run", help="run one scenario and write its report")
    p_run.add_argument("--config", required=True, help="scenario YAML file")
    p_run.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p_run.add_argument("--out", default=None, help="report file to write (JSON)")
    p_run.add_argument("--format", choices=("human", "machine"), default="human")

    p_compare = sub.add_parser("compare", help="tabulate metrics across runs")
    p_compare.add_argument("reports", nargs="+", help="report files from `run`")
    p_compare.add_argument("--by-repetition", action="store_true",
                           help="split a single run into one row per schedule repetition")
    p_compare.add_argument("--out", default=None, help="write the table here instead of stdout")
    p_compare.add_argument("--format", choices=("human", "machine"), default="human")

    p_cases = sub.add_parser("cases", help="list a persisted case base")
    p_cases.add_argument("base", help="case-base file (one JSON record per line)")
    p_cases.add_argument("--status", choices=("positive", "negative", "all"), default="all")
    p_cases.add_argument("--model", default=None, help="only cases proposing this model")
    p_cases.add_argument("--format", choices=("human", "machine"), default="human")
    return parser


def _cmd_validate(args) -> int:
    try:
        cfg = load_scenario(args.config)
    except ConfigValidationError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"configuration OK: {cfg.label} (hash {cfg.config_hash()})")
    return EXIT_OK


def _cmd_run(args) -> int:
    try:
        cfg = load_scenario(args.config, seed_override=args.seed)
    except ConfigValidationError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = simulate(cfg)
    report = result.report
    if args.out:
        out = Path(args.out)
        save_report(report, out)
        if cfg.mode == "cognitive":
            result.positive.save(out.with_suffix(out.suffix + ".positive-cases"))
            result.negative.save(out.with_suffix(out.suffix + ".negative-cases"))
    totals = report.totals
    if args.format == "machine":
        from .report import report_payload

        sys.stdout.write(report_payload(report))
    else:
        print(
            f"{report.label}: mode={report.mode} seed={report.seed} "
            f"arrivals={totals['arrivals']} established={totals['established']} "
            f"blocked={totals['blocked']} preempted={totals['preempted']} "
            f"devolved={totals['devolved']} unbroken={totals['unbroken']}"
        )
        if args.out:
            print(f"report written to {args.out}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    try:
        reports = [load_report(p) for p in args.reports]
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot read report: {exc}", file=sys.stderr)
        return EXIT_COMPARE
    try:
        if args.by_repetition:
            if len(reports) != 1:
                raise ComparabilityError("--by-repetition splits exactly one report")
            comparison = split_by_repetition(reports[0])
        else:
            comparison = compare_reports(reports)
    except ComparabilityError as exc:
        print(f"comparability error: {exc}", file=sys.stderr)
        return EXIT_COMPARE
    rendered = render_machine(comparison) if args.format == "machine" else render_human(comparison) + "\n"
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
    else:
        sys.stdout.write(rendered)
    return EXIT_OK


def _cmd_cases(args) -> int:
    skipped: list[str] = []
    try:
        base = CaseBase.load(args.base, skipped=skipped)
    except (OSError, CbrError) as exc:
        print(f"cannot read case base: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for warning in skipped:
        print(f"warning: skipped corrupt record: {warning}", file=sys.stderr)
    selected = [
        case for case in base.entries
        if (args.status == "all" or case.status.value == args.status)
        and (args.model is None or case.solution.value == args.model)
    ]
    if args.format == "machine":
        import json

        for case in selected:
            record = case.as_dict()
            record["kind"] = base.kind.value
            sys.stdout.write(json.dumps(record, sort_keys=True) + "\n")
    else:
        for case in selected:
            attrs = case.problem.attributes()
            ordered = ", ".join(f"{k}={attrs[k]}" for k in sorted(attrs))
            print(
                f"[{case.status.value}] t={case.created_at:.1f} "
                f"solution={case.solution.value} problem: {ordered}"
            )
        print(f"{len(selected)} case(s) listed from {args.base}")
    return EXIT_DEGRADED if skipped else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "validate": _cmd_validate,
        "run": _cmd_run,
        "compare": _cmd_compare,
        "cases": _cmd_cases,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
